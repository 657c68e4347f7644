import json

import pytest

from updp.config import config_from_dict, load_config
from updp.errors import InvalidConfig, InvalidPolicy, IoError


class TestDefaults:
    def test_minimal(self):
        cfg = config_from_dict({"synth": {}})
        t = cfg.train
        assert (t.tau_instance, t.tau_cluster, t.learning_rate, t.batch_size, t.epochs, t.context_length) == (
            0.5, 1.0, 3e-4, 256, 150, 4)
        assert cfg.budget == 200 and t.num_clusters == 200
        assert cfg.augment.kind == "jitter" and cfg.eval.knn_k == 5

    def test_seed_inherits(self):
        cfg = config_from_dict({"seed": 9, "synth": {}})
        assert cfg.train.seed == cfg.augment.seed == cfg.synth.seed == 9

    def test_section_seed_overrides(self):
        cfg = config_from_dict({"seed": 9, "synth": {"seed": 2}})
        assert cfg.synth.seed == 2 and cfg.train.seed == 9

    def test_clusters_follow_budget(self):
        assert config_from_dict({"synth": {}, "budget": 40}).train.num_clusters == 40
        assert config_from_dict({"synth": {}, "budget": 40, "train": {"num_clusters": 7}}).train.num_clusters == 7

    def test_model_section(self):
        cfg = config_from_dict({"synth": {}, "model": {"d_h": 32, "fuser_seed": 4}})
        assert cfg.train.d_h == 32 and cfg.train.fuser_seed == 4

    def test_cli_overrides(self):
        cfg = config_from_dict({"synth": {}}).with_overrides(seed=3, out_dir="x", strategies=["random"])
        assert (cfg.seed, cfg.train.seed, cfg.synth.seed, cfg.out_dir, cfg.strategies) == (3, 3, 3, "x", ("random",))


class TestRejects:
    @pytest.mark.parametrize("d", [
        {"synth": {}, "bogus": 1},
        {"synth": {"bogus": 1}},
        {"synth": {}, "train": {"lr": 0.1}},
        {"synth": {}, "model": {"depth": 2}},
        {"synth": {}, "eval": {"k": 3}},
        {"synth": {}, "eval": {"probe": {"steps": 3}}},
        {"synth": {}, "strategies": ["oracle"]},
        {"synth": {}, "strategies": []},
        {"synth": {}, "budget": 0},
        {"synth": {}, "train": {"num_clusters": 1}},
        {"synth": {}, "train": {"d_h": 8}, "model": {"d_h": 8}},
        {"synth": {}, "eval": {"feature_space": "text"}},
        {},
    ])
    def test_invalid(self, d):
        with pytest.raises(InvalidConfig):
            cfg = config_from_dict(d)
            cfg.train.model_config(4).validate()

    def test_bad_augment(self):
        with pytest.raises(InvalidPolicy):
            config_from_dict({"synth": {}, "augment": {"kind": "crop"}})

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(InvalidConfig):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_config(tmp_path / "none.json")


def test_round_trip_through_file(tmp_path):
    d = {"seed": 1, "synth": {"num_classes": 3}, "budget": 6, "strategies": ["random", "confidence"]}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert load_config(p) == config_from_dict(d)
