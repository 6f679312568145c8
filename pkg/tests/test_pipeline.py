from qctf.ctf.pipeline import PipelineConfig, run_pipeline
from qctf.ctf.seeding import SeedCuts
from qctf.events import GeneratorConfig, generate_event
from qctf.geometry import DetectorGeometry
from qctf.matching import match_truth


def test_variants_agree_and_stages_shrink():
    for seed in range(3):
        ev = generate_event(GeneratorConfig(n=30, rng_seed=seed), DetectorGeometry())
        a, sa = run_pipeline(ev, variant="original-clean")
        b, sb = run_pipeline(ev, variant="improved-clean")
        assert [c.vector for c in a] == [c.vector for c in b]
        for s in (sa, sb):
            assert s.k_find >= s.k_clean >= s.k_select == len(a)
        for c in a:
            for l, j in c.real_hits():
                assert 0 <= j < ev.count(l)


def test_benign_event_reconstructs_every_particle():
    ev = generate_event(GeneratorConfig(n=50, rng_seed=11), DetectorGeometry())
    tracks, _ = run_pipeline(ev)
    rep = match_truth(tracks, ev)
    assert rep.efficiency >= 0.95 and rep.fake_rate <= 0.05


def test_adversarial_event_with_cuts_disabled():
    ev = generate_event(GeneratorConfig(n=8, adversarial=True, rng_seed=2), DetectorGeometry.with_layers(5))
    tracks, stats = run_pipeline(ev, PipelineConfig(cuts=SeedCuts.disabled()))
    assert stats.k_seed == 8 ** 3
    assert stats.total_ops == stats.seed_ops + stats.find_ops + stats.clean_ops + stats.select_ops


def test_unknown_variant():
    import pytest
    ev = generate_event(GeneratorConfig(n=3), DetectorGeometry())
    with pytest.raises(ValueError):
        run_pipeline(ev, variant="fast")
