import pytest

from config.constants import ABSENT, ScheduleKind, ScmVariant
from config.settings import RunConfig, build_config, load_config, parse_override
from exceptions import ConfigurationError
from utils.helpers import CsvHelper, SeedHelper


# ============================================================================
# DEFAULTS AND VALIDATION
# ============================================================================

def test_defaults():
    cfg = build_config({})
    assert cfg.crm.schedule == ScheduleKind.LINEAR
    assert cfg.crm.alpha == 0.25
    assert cfg.scm.variant == ScmVariant.GLOBAL
    assert cfg.num_classes == cfg.data.gen.num_predicate_classes + 1
    assert cfg.eval.graph_constraint is True


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigurationError):
        build_config({"nonsense": 1})
    with pytest.raises(ConfigurationError) as info:
        build_config({"optim": {"learning_rate": 0.1}})
    assert info.value.details["config_key"].startswith("optim")


@pytest.mark.parametrize(
    "sections",
    [
        {"optim": {"lr": 0.0}},
        {"optim": {"lr": -1.0}},
        {"scm": {"d_model": 10, "heads": 4}},
        {"crm": {"alpha": 1.5}},
        {"crm": {"nu": 1.0}},
        {"ablate": {"grids": ["everything"]}},
        {"logging": {"level": "LOUD"}},
    ],
)
def test_invalid_values_are_configuration_errors(sections):
    with pytest.raises(ConfigurationError):
        build_config(sections)


# ============================================================================
# OVERRIDES
# ============================================================================

@pytest.mark.parametrize(
    "item, key, value",
    [
        ("crm.enabled=false", ["crm", "enabled"], False),
        ("optim.lr=0.05", ["optim", "lr"], 0.05),
        ("seed=7", ["seed"], 7),
        ("crm.schedule=cosine", ["crm", "schedule"], "cosine"),
        ('scm.variant="mean"', ["scm", "variant"], "mean"),
        ("ablate.grids=[\"components\"]", ["ablate", "grids"], ["components"]),
    ],
)
def test_parse_override(item, key, value):
    assert parse_override(item) == (key, value)


def test_override_without_equals():
    with pytest.raises(ConfigurationError):
        parse_override("crm.enabled")
    with pytest.raises(ConfigurationError):
        parse_override("=3")


def test_load_config_layers_file_flags_and_overrides(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("seed = 4\n[optim]\nlr = 0.02\nbatch_size = 3\n", encoding="utf-8")
    cfg = load_config(path, seed=9, output_dir=tmp_path / "out", overrides=["optim.lr=0.5", "crm.enabled=false"])
    assert cfg.seed == 9
    assert cfg.output_dir == tmp_path / "out"
    assert cfg.optim.lr == 0.5
    assert cfg.optim.batch_size == 3
    assert cfg.crm.enabled is False


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[optim\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_config(broken)
    with pytest.raises(ConfigurationError):
        load_config(overrides=["optim.lr.value=1"])


def test_environment_variables(monkeypatch):
    monkeypatch.setenv("SGHT_OPTIM__LR", "0.03")
    monkeypatch.setenv("SGHT_SEED", "17")
    cfg = RunConfig()
    assert cfg.optim.lr == 0.03
    assert cfg.seed == 17


def test_with_overrides_revalidates(tiny_cfg):
    changed = tiny_cfg.with_overrides(crm={"schedule": "exponential"}, seed=5)
    assert changed.crm.schedule == ScheduleKind.EXPONENTIAL
    assert changed.seed == 5
    assert changed.scm == tiny_cfg.scm
    with pytest.raises(ConfigurationError):
        tiny_cfg.with_overrides(optim={"lr": 0.0})


# ============================================================================
# DIGEST
# ============================================================================

def test_digest_tracks_shape_relevant_keys(tiny_cfg):
    assert tiny_cfg.digest() == tiny_cfg.with_overrides(seed=123).digest()
    assert tiny_cfg.digest() == tiny_cfg.with_overrides(optim={"lr": 0.5}).digest()
    assert tiny_cfg.digest() != tiny_cfg.with_overrides(model={"hidden_dim": 9}).digest()
    assert tiny_cfg.digest() != tiny_cfg.with_overrides(scm={"variant": "mean"}).digest()


# ============================================================================
# HELPERS
# ============================================================================

def test_ablation_seed():
    assert SeedHelper.ablation_seed(0, 0, 0) == 0
    assert SeedHelper.ablation_seed(10, 3, 4) == 3014


def test_derived_seeds_are_stable_and_distinct():
    assert SeedHelper.derive(1, "batches") == SeedHelper.derive(1, "batches")
    assert SeedHelper.derive(1, "batches") != SeedHelper.derive(1, "pairs", 0)
    assert SeedHelper.derive(1, "pairs", 0) != SeedHelper.derive(1, "pairs", 1)
    assert 0 <= SeedHelper.derive(5, "init") < 2**63


def test_csv_cells():
    assert CsvHelper.format_value(0.1) == "0.1"
    assert float(CsvHelper.format_value(1 / 3)) == 1 / 3
    assert CsvHelper.format_value(True) == "1"
    assert CsvHelper.format_value(False) == "0"
    assert CsvHelper.format_value(ABSENT) == "NA"
    assert CsvHelper.format_value(7) == "7"
