from __future__ import annotations

import json
from pathlib import Path

import pytest

from oqt.config import ConfigError, RunConfig, config_from_dict, parse_config
from oqt.runner import build_design, build_prior, build_truth
from oqt.seeding import substream

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_minimal_config_fills_defaults():
    cfg = config_from_dict({"version": 1, "seed": 3, "protocol": "ramsey"})
    assert cfg.mode == "infer" and cfg.particles == 2000 and cfg.output_dir == "out"
    assert cfg.prior == {} and cfg.truth == {}


def test_mode_implies_protocol():
    assert config_from_dict({"version": 1, "seed": 1, "mode": "rb"}).protocol == "rb"


@pytest.mark.parametrize("doc, field", [
    ({"version": 1, "seed": 1, "protocol": "ramsey", "particles": 1}, "particles"),
    ({"version": 1, "protocol": "ramsey"}, "seed"),
    ({"seed": 1, "protocol": "ramsey"}, "version"),
    ({"version": 2, "seed": 1, "protocol": "ramsey"}, "version"),
    ({"version": 1, "seed": -1, "protocol": "ramsey"}, "seed"),
    ({"version": 1, "seed": 1, "protocol": "ramsey", "mode": "plot"}, "mode"),
    ({"version": 1, "seed": 1, "mode": "rb", "protocol": "ramsey"}, "protocol"),
    ({"version": 1, "seed": 1, "protocol": "ramsey", "shots": 3}, "unknown config keys"),
    ({"version": 1, "seed": 1, "protocol": "ramsey", "truth": {"kind": "oracle"}}, "truth.kind"),
    ({"version": 1, "seed": 1, "protocol": "ramsey", "rb": {"lengths": []}}, "rb"),
    ({"version": 1, "seed": 1, "protocol": "ramsey", "inference": {"liu_west_a": 2}}, "inference.liu_west_a"),
])
def test_invalid_configs_name_the_field(doc, field):
    with pytest.raises(ConfigError, match=field):
        config_from_dict(doc)


def test_particles_one_allowed_outside_inference():
    assert config_from_dict({"version": 1, "seed": 1, "mode": "dynamics", "particles": 1}).particles == 1


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "seed": 1,\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        parse_config(p)


@pytest.mark.parametrize("name", ["ramsey", "lsgst", "rb", "statetomo", "dynamics"])
def test_shipped_configs_validate(name):
    cfg = parse_config(CONFIGS / f"{name}.json")
    assert cfg.to_dict() == config_from_dict(json.loads(json.dumps(cfg.to_dict()))).to_dict()


def test_ramsey_config_reproduces_reference_parameters():
    cfg = parse_config(CONFIGS / "ramsey.json")
    spec = build_prior(cfg)
    design = build_design(cfg, substream(cfg.seed, "sequences"))
    truth = build_truth(cfg, spec, substream(cfg.seed, "truth"))
    assert len(design.training) == 48 and design.training[0][1] == 500
    assert len(design.testing) == 51
    assert cfg.truth["params"]["omega"] == 0.346754
    assert cfg.truth["params"]["rx_error"] == -0.003824
    assert spec.gates["Rx"].params["variance"] == 1e-3
    assert truth.probability(()) == pytest.approx(0.5 * (1 + (1 - 0.038311) * (1 - 0.023933)))


def test_config_is_immutable():
    cfg = RunConfig(seed=1, protocol="ramsey")
    with pytest.raises(AttributeError):
        cfg.seed = 2
    assert cfg.with_overrides(seed=5, particles=None).seed == 5
