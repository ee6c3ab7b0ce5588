import pytest

from src.kernel import KernelError, check_proof
from src.scripts import ScriptError, certify_lemma, run_script
from src.surface import parse_module


def prove(text: str, env=None):
    module = parse_module(text, "<test>", env)
    assert module.ok, module.errors
    theorem = module.decls[-1]
    st = run_script(theorem.sequent, theorem.script, module.env)
    check_proof(theorem.sequent, st.tree())
    return st


def test_reorder_then_hyp():
    st = prove("""
theorem shuffle [p q r : prop] : p * q * r |- r * (p * q)
proof shuffle {
  reorder 2 0 1;
  rule hyp;
  qed
}
""")
    assert st.done


def test_specialize_inside_the_hypothesis():
    prove("""
theorem inst [n : nat] : True * (forall (m : nat). m = m) |- n = n
proof inst {
  specialize (n) at [1];
  rule weaken_hyp 1;
  rule hyp;
  qed
}
""")


def test_hoare_intro():
    prove("""
theorem five : True |- box (True -* wp (ret 5) {x. x = 5})
proof five {
  hoare_intro;
  rule wp_val;
  rule eq_formation;
  qed
}
""")


def test_intro_and_named_arguments():
    prove("""
theorem frame [l : ref nat] : l |-> 1 |- wp (step; get l) {x. x = 1 * l |-> 1}
proof frame {
  rule wp_bind;
  rule wp_step;
  rule later_intro;
  rule wp_get;
  rule exists_intro (1);
  rule sep_unit_intro side=hyp;
  rule sep_mono;
  rule hyp;
  rule later_intro;
  intro;
  rule sep_mono;
  rule eq_formation;
  rule hyp;
  qed
}
""")


def test_rewrite_step():
    prove("""
theorem reads [l : ref nat] : True |- (set l 5; get l) = (step; set l 5; ret 5)
proof reads {
  rewrite get_after_set at [1];
  rule eq_formation;
  qed
}
""")


def test_open_goals_at_qed():
    with pytest.raises(ScriptError) as info:
        prove("""
theorem half : True |- box (True -* wp (ret 5) {x. x = 5})
proof half {
  hoare_intro;
  qed
}
""")
    assert "left open" in str(info.value)


def test_unknown_step():
    with pytest.raises(ScriptError) as info:
        prove("""
theorem t [p : prop] : p |- p
proof t {
  frobnicate;
  qed
}
""")
    assert info.value.step is not None and info.value.step.keyword == "frobnicate"


def test_kernel_failure_is_wrapped():
    with pytest.raises(ScriptError) as info:
        prove("""
theorem t [p q : prop] : p * q |- q * p
proof t {
  rule hyp;
  qed
}
""")
    assert isinstance(info.value.cause, KernelError)
    assert info.value.cause.kind == "rule-mismatch"
    assert info.value.span is not None and info.value.span.line == 4


def test_kernel_failure_names_the_proof_node():
    with pytest.raises(ScriptError) as info:
        prove("""
theorem t [p q : prop] : p * q |- q * p
proof t {
  rule sep_comm;
  rule later_intro;
  qed
}
""")
    assert info.value.cause.kind == "rule-mismatch"
    assert info.value.cause.path == (0,)
    assert info.value.span.line == 5


def test_step_after_last_goal():
    with pytest.raises(ScriptError) as info:
        prove("""
theorem t [p : prop] : p |- p
proof t {
  rule hyp;
  rule hyp;
  qed
}
""")
    assert "no goals" in str(info.value)


def test_lemmas_are_certified_once(case_env):
    env = case_env.copy()
    tree = certify_lemma("swap_cells", env)
    assert env.lemmas["swap_cells"] is tree
    assert certify_lemma("swap_cells", env) is tree


@pytest.mark.parametrize("name", ["swap_cells", "append_correct"])
def test_library_theorems_replay(case_env, name):
    theorem = case_env.theorems[name]
    st = run_script(theorem.sequent, theorem.script, case_env.copy())
    check_proof(theorem.sequent, st.tree())
