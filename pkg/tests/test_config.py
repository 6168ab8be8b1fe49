import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import pytest

from core.config import (
    ConfigError,
    CutoffMode,
    CutoffPolicy,
    PsiKind,
    StudyKind,
    config_from_mapping,
    load_config,
)

STUDIES = Path(__file__).resolve().parents[1] / "studies"


def _mapping(**sections):
    base = {
        "hamiltonian": {"text": "a* a"},
        "classical": {"alpha0": 1.0, "times": [1.0]},
        "quantum": {},
        "sweep": {"hbars": [0.1, 0.05, 0.025, 0.0125]},
    }
    for name, values in sections.items():
        base[name] = {**base.get(name, {}), **values}
    return base


def test_defaults_from_a_minimal_mapping():
    cfg = config_from_mapping(_mapping())
    assert cfg.hamiltonian == "a* a"
    assert cfg.alpha0 == 1.0
    assert cfg.psi.kind is PsiKind.VACUUM
    assert cfg.cutoff.mode is CutoffMode.AUTO
    assert cfg.study.kind is StudyKind.W_DISTANCE
    assert cfg.study.slope_threshold == pytest.approx(0.45)
    assert cfg.concurrency == 1
    assert cfg.eta == pytest.approx(0.1)


def test_bundled_studies_load():
    harmonic = load_config(STUDIES / "harmonic.toml")
    assert harmonic.name == "harmonic"
    assert harmonic.times[-1] == pytest.approx(3.141592653589793)
    quartic = load_config(STUDIES / "quartic.toml")
    assert quartic.study.kind is StudyKind.CORRELATOR
    assert quartic.study.slope_threshold == pytest.approx(0.9)
    assert quartic.alpha0 == 0.5
    load_config(STUDIES / "anharmonic.toml")


def test_alpha0_forms():
    assert config_from_mapping(_mapping(classical={"alpha0": [0.5, -0.25]})).alpha0 == 0.5 - 0.25j
    assert config_from_mapping(_mapping(classical={"alpha0": "1+2i"})).alpha0 == 1 + 2j
    with pytest.raises(ConfigError):
        config_from_mapping(_mapping(classical={"alpha0": True}))


@pytest.mark.parametrize(
    "sections, field_name",
    [
        ({"hamiltonian": {"text": "  "}}, "hamiltonian.text"),
        ({"sweep": {"hbars": [0.05, 0.1]}}, "sweep.hbars"),
        ({"sweep": {"hbars": [1.5, 0.1]}}, "sweep.hbars"),
        ({"sweep": {"hbars": []}}, "sweep.hbars"),
        ({"classical": {"times": [2.0, 1.0]}}, "classical.times"),
        ({"classical": {"times": [-1.0]}}, "classical.times"),
        ({"quantum": {"psi": "coherent"}}, "quantum.psi"),
        ({"quantum": {"psi": [0.0, 0.0]}}, "quantum.psi"),
        ({"quantum": {"cutoff": 0}}, "quantum.cutoff"),
        ({"quantum": {"kappa": -1.0}}, "quantum.kappa"),
        ({"quantum": {"assumption_cutoffs": [200]}}, "quantum.assumption_cutoffs"),
        ({"sweep": {"study": "spectral"}}, "sweep.study"),
        ({"sweep": {"study": "correlator"}}, "sweep.observable"),
        ({"sweep": {"concurrency": 0}}, "sweep.concurrency"),
        ({"tolerances": {"ode": 0.0}}, "tolerances.ode"),
    ],
)
def test_invalid_fields_name_the_field(sections, field_name):
    with pytest.raises(ConfigError) as info:
        config_from_mapping(_mapping(**sections))
    assert info.value.field == field_name


def test_psi_coefficients_are_normalised():
    cfg = config_from_mapping(_mapping(quantum={"psi": [3.0, [0.0, 4.0]]}))
    assert cfg.psi.kind is PsiKind.COEFFICIENTS
    assert cfg.psi.coefficients == pytest.approx((0.6, 0.8j))


def test_cutoff_policy():
    auto = CutoffPolicy()
    assert auto.resolve(1.0, 0.1, 2) == 120
    fixed = config_from_mapping(_mapping(quantum={"cutoff": 80})).cutoff
    assert fixed.mode is CutoffMode.FIXED
    assert fixed.resolve(5.0, 0.001, 6) == 80


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "missing.toml")
    assert info.value.field == "path"
    broken = tmp_path / "broken.toml"
    broken.write_text("[hamiltonian\ntext = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)
