import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwre.env import (
    BALANCE_TOL,
    LatticeBox,
    constant_environment,
    load_environment,
    make_law,
    sample_environment,
    save_environment,
    validate_environment,
)
from rwre.errors import BalanceError, DegenerateLawError, FormatError, ProbabilityError


def test_srw_law_single_atom():
    law = make_law("srw", d=2)
    assert len(law.atoms) == 1
    p, q = law.atoms[0]
    assert np.allclose(p, [0.25, 0.25])
    assert q == 1.0


def test_axis_choice_law_atoms():
    # the two-atom law that picks one axis and puts weight 1/2 on it
    law = make_law("axis-choice", d=2)
    atoms = sorted((tuple(p), q) for p, q in law.atoms)
    assert atoms == [((0.0, 0.5), 0.5), ((0.5, 0.0), 0.5)]


def test_unbalanced_atom_rejected():
    with pytest.raises(BalanceError):
        make_law("custom", atoms=[((0.6, 0.0), 1.0)])


def test_degenerate_law_rejected():
    with pytest.raises(DegenerateLawError):
        make_law("custom", atoms=[((0.5, 0.0), 1.0)])


def test_bad_probabilities_rejected():
    with pytest.raises(ProbabilityError):
        make_law(
            "custom",
            atoms=[((0.5, 0.0), 0.6), ((0.0, 0.5), 0.6)],
        )


def test_srw_sampling_constant():
    law = make_law("srw", d=2)
    env = sample_environment(law, LatticeBox((-5, -5), (5, 5)), 123)
    assert np.all(env.weights == 0.25)


def test_axis_choice_frequency_binomial():
    # empirical fraction of horizontal sites over many seeds, 3-sigma band
    law = make_law("axis-choice", d=2)
    box = LatticeBox((0, 0), (63, 63))
    seeds = 1000
    horizontal = 0
    total = 0
    for s in range(seeds):
        env = sample_environment(law, box, s)
        horizontal += int((env.weights[..., 0] > 0).sum())
        total += box.num_sites
    frac = horizontal / total
    tol = 3 * math.sqrt(0.25 / (4096 * seeds))
    assert abs(frac - 0.5) <= tol


def test_sampling_deterministic():
    law = make_law("axis-choice", d=2)
    box = LatticeBox((-8, -8), (8, 8))
    e1 = sample_environment(law, box, 42)
    e2 = sample_environment(law, box, 42)
    assert np.array_equal(e1.weights, e2.weights)
    assert e1 == e2


def test_sampling_order_independent_nested_boxes():
    # weights are a pure function of (seed, site): sub-boxes agree with slices
    law = make_law("axis-choice", d=2)
    big = sample_environment(law, LatticeBox((-10, -10), (10, 10)), 7)
    small = sample_environment(law, LatticeBox((-3, 2), (5, 9)), 7)
    sl = big.weights[7:16, 12:20]
    assert np.array_equal(sl, small.weights)


def test_balance_structural_at_all_sites():
    law = make_law("axis-choice", d=3)
    env = sample_environment(law, LatticeBox.centered(5, 3), 9)
    sums = 2 * env.weights.sum(axis=-1)
    assert np.max(np.abs(sums - 1)) <= BALANCE_TOL


def test_validate_srw_passes(srw2_env):
    rep = validate_environment(srw2_env)
    assert rep.ok and rep.balance_ok and rep.axis_present == [True, True]


def test_validate_flags_missing_axis(horizontal_env):
    rep = validate_environment(horizontal_env)
    assert not rep.ok
    assert rep.missing_axes == [1]


def test_validate_lists_corrupted_site(srw2):
    env = sample_environment(srw2, LatticeBox((-2, -2), (2, 2)), 0)
    w = env.weights.copy()
    w[1, 1] = [0.25, 0.2]  # sums to 0.9
    from rwre.env import Environment

    env2 = Environment(box=env.box, weights=w, law_name="corrupt", seed=0)
    rep = validate_environment(env2)
    assert not rep.balance_ok
    assert rep.balance_violations == [((-1, -1), pytest.approx(0.9))]


def test_save_load_roundtrip(tmp_path, axis2_env):
    path = tmp_path / "e.env"
    save_environment(axis2_env, path)
    back = load_environment(path)
    assert back == axis2_env


def test_load_bad_magic(tmp_path):
    path = tmp_path / "bad.env"
    path.write_bytes(b"NOT-AN-ENV\nd=2\n")
    with pytest.raises(FormatError):
        load_environment(path)


def test_load_truncated_payload(tmp_path, srw2_env):
    path = tmp_path / "t.env"
    save_environment(srw2_env, path)
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(FormatError) as ei:
        load_environment(path)
    assert ei.value.offset is not None


def test_load_box_payload_mismatch(tmp_path, srw2_env):
    path = tmp_path / "m.env"
    save_environment(srw2_env, path)
    data = path.read_bytes()
    hacked = data.replace(b"box=-40,-40:40,40", b"box=-40,-40:40,41", 1)
    assert hacked != data
    path.write_bytes(hacked)
    with pytest.raises(FormatError):
        load_environment(path)


@st.composite
def balanced_laws(draw):
    d = draw(st.integers(min_value=1, max_value=3))
    k = draw(st.integers(min_value=1, max_value=4))
    atoms = []
    for _ in range(k):
        raw = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=d, max_size=d)))
        p = raw / (2 * raw.sum())
        atoms.append(p)
    qs = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)))
    qs = qs / qs.sum()
    # exact renormalization so invariants hold to 1e-12
    atoms = [p - (p.sum() - 0.5) / d for p in atoms]
    qs[-1] = 1.0 - qs[:-1].sum()
    return d, [(p, float(q)) for p, q in zip(atoms, qs)]


@given(balanced_laws(), st.integers(min_value=0, max_value=2**32))
@settings(max_examples=25, deadline=None)
def test_sampled_environments_balanced(law_spec, seed):
    d, atoms = law_spec
    try:
        law = make_law("custom", atoms=atoms)
    except (BalanceError, ProbabilityError, DegenerateLawError):
        return
    env = sample_environment(law, LatticeBox.centered(3, d), seed)
    sums = 2 * env.weights.sum(axis=-1)
    assert np.max(np.abs(sums - 1)) <= 1e-9
    rep = validate_environment(env)
    assert rep.balance_ok


def test_capacity_error():
    from rwre.errors import CapacityError

    law = make_law("srw", d=2)
    with pytest.raises(CapacityError):
        sample_environment(law, LatticeBox.centered(10_000, 2), 0)


def test_load_dimension_mismatch(tmp_path, srw2_env):
    path = tmp_path / "d.env"
    save_environment(srw2_env, path)
    data = path.read_bytes().replace(b"d=2", b"d=3", 1)
    path.write_bytes(data)
    with pytest.raises(FormatError):
        load_environment(path)
