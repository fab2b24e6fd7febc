import json
import math

import numpy as np
import pytest
from scipy import integrate

from segar.factors import (
    BALL, GOAL, HOLE, MASS, OBJECT, POSITION, RADIUS, SAND, VELOCITY,
    Arena, LayoutError, SegarError,
)
from segar.presets import BUILTIN_TASKS, DIFFICULTIES, builtin_template
from segar.tasks import (
    ConstantPrior, DiscretePrior, GaussianPrior, PlacementError, Prior,
    PriorError, SlotSpec, TaskInstance, TaskTemplate, TemplateError,
    UniformPrior, build_task_set, load_template, prior_from_json, sample_task,
    save_template, template_entropy,
)

N_MC = 100_000


def rng_of(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def draws(prior, n=N_MC, seed=0):
    g = rng_of(seed)
    return np.array([prior.sample(g) for _ in range(n)], dtype=np.float64)


def base_priors():
    return {
        ("ball", "Mass", 0): UniformPrior(0.5, 2.0),
        ("ball", "Controlled", 0): ConstantPrior(True),
        ("ball", "Position", 0): UniformPrior(0.1, 0.45),
        ("ball", "Position", 1): UniformPrior(0.1, 0.9),
        ("goal", "Position", 0): UniformPrior(0.55, 0.9),
        ("goal", "Position", 1): UniformPrior(0.1, 0.9),
        ("sand", "Friction", 0): UniformPrior(0.1, 0.4),
        ("sand", "Position", 0): UniformPrior(0.15, 0.85),
        ("sand", "Position", 1): UniformPrior(0.15, 0.85),
    }


def simple_template(**kw):
    defaults = dict(
        name="two-ball",
        slots=[SlotSpec("ball", BALL), SlotSpec("goal", GOAL),
               SlotSpec("sand", SAND)],
        priors=base_priors(),
    )
    defaults.update(kw)
    return TaskTemplate(**defaults)


# ---------------------------------------------------------------------------
# Prior validation
# ---------------------------------------------------------------------------

def test_uniform_rejects_empty_interval():
    with pytest.raises(PriorError):
        UniformPrior(1.0, 1.0)
    with pytest.raises(PriorError):
        UniformPrior(2.0, 1.0)


def test_gaussian_rejects_bad_std():
    with pytest.raises(PriorError):
        GaussianPrior(0.0, 0.0)
    with pytest.raises(PriorError):
        GaussianPrior(0.0, -1.0)


def test_gaussian_rejects_hopeless_truncation():
    # the window [40, 41] holds ~1e-350 of a standard normal's mass
    with pytest.raises(PriorError):
        GaussianPrior(0.0, 1.0, low=40.0, high=41.0)
    with pytest.raises(PriorError):
        GaussianPrior(0.0, 1.0, low=3.0, high=2.0)
    # a survivable tail is fine
    GaussianPrior(0.0, 1.0, low=3.0)


def test_discrete_rejects_bad_weights():
    with pytest.raises(PriorError):
        DiscretePrior([])
    with pytest.raises(PriorError):
        DiscretePrior([1, 2], [0.5])
    with pytest.raises(PriorError):
        DiscretePrior([1, 2], [0.7, 0.7])
    with pytest.raises(PriorError):
        DiscretePrior([1, 2], [-0.1, 1.1])


# ---------------------------------------------------------------------------
# Prior statistics: moments, densities, entropies
# ---------------------------------------------------------------------------

def test_uniform_moments():
    xs = draws(UniformPrior(0.2, 0.8))
    se = math.sqrt(0.6 ** 2 / 12 / N_MC)
    assert abs(xs.mean() - 0.5) < 3 * se
    assert abs(xs.var() - 0.6 ** 2 / 12) < 0.001
    assert xs.min() >= 0.2 and xs.max() <= 0.8


def test_gaussian_moments():
    xs = draws(GaussianPrior(1.0, 0.5), seed=1)
    se = 0.5 / math.sqrt(N_MC)
    assert abs(xs.mean() - 1.0) < 3 * se
    assert abs(xs.std() - 0.5) < 0.005


def test_half_normal_moments():
    # Gaussian(0,1) truncated to [0, inf): mean sqrt(2/pi), var 1 - 2/pi
    p = GaussianPrior(0.0, 1.0, low=0.0)
    xs = draws(p, seed=2)
    mean = math.sqrt(2 / math.pi)
    var = 1 - 2 / math.pi
    assert abs(xs.mean() - mean) < 3 * math.sqrt(var / N_MC)
    assert xs.min() >= 0.0


def test_discrete_moments():
    p = DiscretePrior([0.0, 1.0], [0.3, 0.7])
    xs = draws(p, seed=3)
    se = math.sqrt(0.21 / N_MC)
    assert abs(xs.mean() - 0.7) < 3 * se
    assert set(np.unique(xs)) == {0.0, 1.0}


@pytest.mark.parametrize("prior", [
    UniformPrior(0.2, 0.8),
    GaussianPrior(1.0, 0.5),
    GaussianPrior(0.0, 1.0, low=0.0),
    GaussianPrior(2.0, 0.3, low=1.5, high=2.2),
])
def test_pdf_integrates_to_one(prior):
    lo, hi = prior.support()
    if not math.isfinite(lo):
        lo = -20.0
    if not math.isfinite(hi):
        hi = 20.0
    mass, err = integrate.quad(prior.pdf, lo, hi, limit=200)
    assert abs(mass - 1.0) < 1e-6


@pytest.mark.parametrize("prior", [
    UniformPrior(0.2, 0.8),
    GaussianPrior(1.0, 0.5),
    GaussianPrior(0.0, 1.0, low=0.0, high=2.5),
])
def test_cdf_matches_integrated_pdf(prior):
    lo, hi = prior.support()
    if not math.isfinite(lo):
        lo = -20.0
    if not math.isfinite(hi):
        hi = 20.0
    for q in (0.1, 0.35, 0.5, 0.82):
        x = lo + q * (hi - lo)
        mass, _ = integrate.quad(prior.pdf, lo, x, limit=200)
        assert abs(prior.cdf(x) - mass) < 1e-9
    assert prior.cdf(lo - 1) == 0.0
    assert prior.cdf(hi + 1) == 1.0


def test_entropy_closed_forms():
    assert UniformPrior(0.0, 2.0).entropy() == pytest.approx(math.log(2.0), abs=1e-12)
    assert GaussianPrior(3.0, 1.0).entropy() == pytest.approx(
        0.5 * math.log(2 * math.pi * math.e), abs=1e-12)
    assert ConstantPrior(5.0).entropy() == 0.0
    assert DiscretePrior([1, 2, 3, 4]).entropy() == pytest.approx(math.log(4))
    # half-normal: 0.5*log(pi/2) + 0.5
    assert GaussianPrior(0.0, 1.0, low=0.0).entropy() == pytest.approx(
        0.5 * math.log(math.pi / 2) + 0.5, abs=1e-12)
    # truncation strictly reduces entropy
    assert GaussianPrior(0.0, 1.0, low=-1.0, high=1.0).entropy() \
        < GaussianPrior(0.0, 1.0).entropy()


def test_entropy_matches_monte_carlo():
    p = GaussianPrior(1.0, 0.5, low=0.4, high=2.1)
    xs = draws(p, seed=4)
    mc = -np.log([p.pdf(x) for x in xs]).mean()
    assert abs(mc - p.entropy()) < 0.01


def test_prior_json_roundtrip():
    priors = [
        ConstantPrior(0.25), ConstantPrior((0.1, 0.9)), ConstantPrior(True),
        UniformPrior(0.0, 1.0),
        GaussianPrior(0.5, 0.2, low=0.0, high=1.0),
        DiscretePrior(["circle", "square"], [0.25, 0.75]),
    ]
    for p in priors:
        q = prior_from_json(json.loads(json.dumps(p.to_json())))
        assert type(q) is type(p)
        assert q.to_json() == p.to_json()


def test_prior_from_json_unknown_kind():
    with pytest.raises(TemplateError):
        prior_from_json({"kind": "cauchy", "loc": 0.0})


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

def test_template_rejects_unknown_targets():
    with pytest.raises(TemplateError):
        simple_template(priors={("nobody", "Mass", 0): UniformPrior(0, 1)})
    with pytest.raises(TemplateError):
        simple_template(priors={("ball", "Blorbo", 0): UniformPrior(0, 1)})
    with pytest.raises(TemplateError):
        # goal has no Mass
        simple_template(priors={("goal", "Mass", 0): UniformPrior(0, 1)})
    with pytest.raises(TemplateError):
        # scalar factor, component 1
        simple_template(priors={("ball", "Mass", 1): UniformPrior(0, 1)})


def test_template_rejects_continuous_prior_on_boolean():
    with pytest.raises(TemplateError):
        simple_template(priors={("ball", "Controlled", 0): UniformPrior(0, 1)})


def test_template_rejects_duplicate_slots():
    with pytest.raises(TemplateError):
        simple_template(slots=[SlotSpec("ball", BALL), SlotSpec("ball", GOAL)])


def test_template_rejects_spread_count_prior():
    with pytest.raises(TemplateError):
        SlotSpec("sand", SAND, UniformPrior(0, 3))
    with pytest.raises(TemplateError):
        SlotSpec("sand", SAND, ConstantPrior(-1))
    with pytest.raises(TemplateError):
        SlotSpec("sand", SAND, DiscretePrior([1, 2.5], [0.5, 0.5]))


def test_template_rejects_unknown_reward_and_rule():
    with pytest.raises(TemplateError):
        simple_template(reward="golf")
    with pytest.raises(SegarError):
        simple_template(rules=("does_not_exist",))


def test_template_entropy_sums_parts():
    t = simple_template()
    got = template_entropy(t)
    # spread comes only from the three explicit priors (counts and the
    # rest are constants with zero entropy)
    want = UniformPrior(0.5, 2.0).entropy() + UniformPrior(0.1, 0.4).entropy()
    # plus the default position boxes: every slot draws Position from the
    # arena-sized defaults unless pinned
    for slot in t.slots:
        for comp in (0, 1):
            p = t.component_prior(slot, POSITION, comp)
            if p.continuous:
                want += p.entropy()
    assert got == pytest.approx(want, abs=1e-12)


def test_template_json_roundtrip(tmp_path):
    t = builtin_template("puttputt", "medium")
    path = tmp_path / "t.json"
    save_template(t, str(path))
    again = load_template(str(path))
    assert again.to_json() == t.to_json()
    assert again.name == t.name
    assert again.entropy() == pytest.approx(t.entropy(), abs=1e-12)


def test_template_from_json_names_bad_prior():
    data = builtin_template("puttputt").to_json()
    data["priors"][0].update({"kind": "uniform", "low": 2.0, "high": 1.0})
    bad = data["priors"][0]
    with pytest.raises(TemplateError) as err:
        TaskTemplate.from_json(data)
    assert bad["slot"] in str(err.value) and bad["factor"] in str(err.value)


def test_template_from_json_rejects_unknown_schema():
    data = builtin_template("puttputt").to_json()
    data["schema"] = 99
    with pytest.raises(TemplateError):
        TaskTemplate.from_json(data)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def test_sample_task_deterministic():
    t = simple_template()
    a = sample_task(t, 123)
    b = sample_task(t, 123)
    c = sample_task(t, 124)
    assert [e.values for e in a.entities] == [e.values for e in b.entities]
    assert [e.values for e in a.entities] != [e.values for e in c.entities]


def test_sample_task_ids_and_slots():
    inst = sample_task(simple_template(), 7)
    assert [e.id for e in inst.entities] == [1, 2, 3]
    assert inst.slot_of == {1: "ball", 2: "goal", 3: "sand"}


def test_sample_respects_prior_bounds():
    t = simple_template()
    for seed in range(50):
        inst = sample_task(t, seed)
        m = inst.entities[0].values[MASS]
        assert 0.5 <= m <= 2.0


def test_editing_one_prior_leaves_other_streams_alone():
    base = simple_template()
    shifted = base_priors()
    shifted[("ball", "Mass", 0)] = UniformPrior(5.0, 9.0)  # the one edit
    edited = simple_template(priors=shifted)
    for seed in (0, 11, 42):
        a = sample_task(base, seed)
        b = sample_task(edited, seed)
        # mass moved to the new interval
        assert a.entities[0].values[MASS] != b.entities[0].values[MASS]
        assert 5.0 <= b.entities[0].values[MASS] <= 9.0
        # everything else identical, including the ball's own position
        assert a.entities[0].values[POSITION] == b.entities[0].values[POSITION]
        assert a.entities[1].values == b.entities[1].values
        assert a.entities[2].values == b.entities[2].values


def test_count_prior_spreads_counts():
    t = simple_template(slots=[
        SlotSpec("ball", BALL),
        SlotSpec("sand", SAND, DiscretePrior([1, 2, 3])),
    ], priors={
        ("ball", "Controlled", 0): ConstantPrior(True),
        ("sand", "Position", 0): UniformPrior(0.1, 0.9),
        ("sand", "Position", 1): UniformPrior(0.1, 0.9),
    })
    seen = set()
    for seed in range(60):
        inst = sample_task(t, seed)
        n_sand = sum(1 for e in inst.entities if e.etype is SAND)
        assert n_sand in (1, 2, 3)
        seen.add(n_sand)
    assert seen == {1, 2, 3}


def test_zero_count_slot_is_empty():
    t = simple_template(slots=[SlotSpec("ball", BALL),
                               SlotSpec("sand", SAND, ConstantPrior(0))],
                        priors={("ball", "Controlled", 0): ConstantPrior(True)})
    inst = sample_task(t, 5)
    assert all(e.etype is not SAND for e in inst.entities)


def test_objects_never_overlap_each_other():
    t = TaskTemplate(
        name="crowded",
        slots=[SlotSpec("balls", OBJECT, ConstantPrior(8))],
        priors={
            ("balls", "Radius", 0): ConstantPrior(0.04),
            ("balls", "Position", 0): UniformPrior(0.05, 0.95),
            ("balls", "Position", 1): UniformPrior(0.05, 0.95),
        },
    )
    for seed in range(30):
        inst = sample_task(t, seed)
        ents = inst.entities
        for i in range(len(ents)):
            for j in range(i + 1, len(ents)):
                pi, pj = ents[i].values[POSITION], ents[j].values[POSITION]
                ri, rj = ents[i].values[RADIUS], ents[j].values[RADIUS]
                d = math.hypot(pi[0] - pj[0], pi[1] - pj[1])
                assert d >= ri + rj - 1e-12


def test_objects_may_sit_on_tiles():
    # tiles and objects are different categories; forcing both to the
    # center must not raise
    t = TaskTemplate(
        name="stacked",
        slots=[SlotSpec("ball", OBJECT), SlotSpec("sand", SAND)],
        priors={
            ("ball", "Position", 0): ConstantPrior(0.5),
            ("ball", "Position", 1): ConstantPrior(0.5),
            ("sand", "Position", 0): ConstantPrior(0.5),
            ("sand", "Position", 1): ConstantPrior(0.5),
            ("sand", "Radius", 0): ConstantPrior(0.3),
        },
    )
    inst = sample_task(t, 0)
    assert inst.entities[0].values[POSITION] == (0.5, 0.5)
    assert inst.entities[1].values[POSITION] == (0.5, 0.5)


def test_impossible_placement_raises():
    # two radius-0.7 balls need 1.4 of separation; the arena diagonal
    # only offers ~1.27, so no amount of redrawing can help
    t = TaskTemplate(
        name="too-big",
        slots=[SlotSpec("balls", OBJECT, ConstantPrior(2))],
        priors={
            ("balls", "Radius", 0): ConstantPrior(0.7),
            ("balls", "Position", 0): UniformPrior(0.05, 0.95),
            ("balls", "Position", 1): UniformPrior(0.05, 0.95),
        },
    )
    with pytest.raises(PlacementError):
        sample_task(t, 0)


def test_positions_stay_in_arena():
    t = simple_template(arena=Arena((0.0, 0.0), (2.0, 2.0)))
    for seed in range(20):
        for e in sample_task(t, seed).entities:
            assert t.arena.contains(e.values[POSITION])


# ---------------------------------------------------------------------------
# Instances and task sets
# ---------------------------------------------------------------------------

def test_instance_state_is_a_copy():
    inst = sample_task(simple_template(), 3)
    state = inst.to_state()
    state.entities[0].set(MASS, 99.0)
    assert inst.entities[0].values[MASS] != 99.0
    # world carries the template's physics constants
    from segar.factors import GRAVITY
    assert state.world.values[GRAVITY] == 10.0
    assert state.dt == 0.01


def test_instance_json_roundtrip():
    t = simple_template()
    inst = sample_task(t, 17)
    again = TaskInstance.from_json(json.loads(json.dumps(inst.to_json())), t)
    assert again.seed == 17
    assert again.slot_of == inst.slot_of
    assert [e.values for e in again.entities] == [e.values for e in inst.entities]
    v1, l1 = inst.flat()
    v2, l2 = again.flat()
    assert l1.signature() == l2.signature()
    assert np.array_equal(v1, v2)


def test_build_task_set_shapes():
    t = simple_template()
    ts = build_task_set(t, range(10))
    assert len(ts) == 10
    assert ts.matrix.shape == (10, ts.layout.width)
    assert ts.matrix.dtype == np.float64
    for row, inst in zip(ts.matrix, ts.instances):
        vec, _ = inst.flat()
        assert np.array_equal(row, vec)
    assert ts.seeds == list(range(10))


def test_build_task_set_rejects_ragged_layouts():
    t = simple_template(slots=[
        SlotSpec("ball", BALL),
        SlotSpec("sand", SAND, DiscretePrior([1, 2])),
    ], priors={
        ("ball", "Controlled", 0): ConstantPrior(True),
        ("sand", "Position", 0): UniformPrior(0.1, 0.9),
        ("sand", "Position", 1): UniformPrior(0.1, 0.9),
    })
    with pytest.raises(LayoutError):
        build_task_set(t, range(40))
    with pytest.raises(SegarError):
        build_task_set(simple_template(), [])


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def test_builtin_templates_sample_cleanly():
    for task in BUILTIN_TASKS:
        for diff in DIFFICULTIES:
            t = builtin_template(task, diff)
            inst = sample_task(t, 0)
            assert inst.entities
            state = inst.to_state()
            assert state.world is not None


def test_builtin_difficulty_widens_priors():
    def width(t, key):
        p = t.priors[key]
        return p.high - p.low

    key = ("ball", "Mass", 0)
    easy = width(builtin_template("puttputt", "easy"), key)
    medium = width(builtin_template("puttputt", "medium"), key)
    hard = width(builtin_template("puttputt", "hard"), key)
    assert medium == pytest.approx(2 * easy)
    assert hard == pytest.approx(4 * easy)
    # and entropy strictly grows with the tier
    assert (builtin_template("puttputt", "easy").entropy()
            < builtin_template("puttputt", "medium").entropy()
            < builtin_template("puttputt", "hard").entropy())


def test_builtin_rejects_unknown_names():
    with pytest.raises(SegarError):
        builtin_template("minigolf")
    with pytest.raises(SegarError):
        builtin_template("puttputt", "nightmare")


def test_invisiball_hides_the_ball():
    t = builtin_template("invisiball")
    assert t.observation["hide_controlled_position_after"] == 1
    assert t.observation["mode"] == "partial-state"
