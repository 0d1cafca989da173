"""key=value config parsing and CLI-over-file precedence."""

import pytest

from bridgerec.config import SCHEMA, load_config, merged
from bridgerec.errors import IngestError


def write(tmp_path, text):
    p = tmp_path / "run.conf"
    p.write_text(text)
    return p


class TestLoadConfig:
    def test_types_and_spacing(self, tmp_path):
        p = write(tmp_path, (
            "schedule.kind=vp\n"
            "schedule.beta1 = 20.0\n"
            "sampler.steps=  24\n"
            "train.con_mode = yes\n"
            "model.lambda=50\n"
        ))
        v = load_config(p)
        assert v["schedule.kind"] == "vp"
        assert v["schedule.beta1"] == 20.0
        assert v["sampler.steps"] == 24
        assert v["train.con_mode"] is True
        assert v["model.lambda"] == 50.0

    def test_comments_and_blanks(self, tmp_path):
        p = write(tmp_path, (
            "# full-line comment\n"
            "\n"
            "train.lr = 0.01  # trailing comment\n"
        ))
        assert load_config(p) == {"train.lr": 0.01}

    def test_unknown_key_reports_line(self, tmp_path):
        p = write(tmp_path, "train.lr = 0.1\nmodel.depth = 3\n")
        with pytest.raises(IngestError, match=r":2: unknown key 'model.depth'"):
            load_config(p)

    def test_missing_equals_reports_line(self, tmp_path):
        p = write(tmp_path, "train.lr 0.1\n")
        with pytest.raises(IngestError, match=r":1: expected key = value"):
            load_config(p)

    def test_bad_value_reports_key(self, tmp_path):
        p = write(tmp_path, "sampler.steps = many\n")
        with pytest.raises(IngestError, match="bad value for sampler.steps"):
            load_config(p)

    def test_bad_bool_rejected(self, tmp_path):
        p = write(tmp_path, "train.con_mode = maybe\n")
        with pytest.raises(IngestError, match="true/false"):
            load_config(p)

    def test_every_schema_key_parses(self, tmp_path):
        sample = {"bool": "true", str: "x", int: "3", float: "0.5"}
        text = "".join(f"{k} = {sample[t]}\n" for k, t in SCHEMA.items())
        v = load_config(write(tmp_path, text))
        assert set(v) == set(SCHEMA)


class TestMerged:
    def test_cli_wins(self):
        out = merged({"train.lr": 0.1, "sampler.steps": 12},
                     {"train.lr": 0.5})
        assert out == {"train.lr": 0.5, "sampler.steps": 12}

    def test_none_means_not_given(self):
        out = merged({"train.lr": 0.1}, {"train.lr": None, "train.epochs": 3})
        assert out == {"train.lr": 0.1, "train.epochs": 3}

    def test_empty_file_side(self):
        assert merged({}, {"sampler.seed": 4}) == {"sampler.seed": 4}
