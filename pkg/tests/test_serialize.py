"""JSON/CSV document schemas and the run manifest."""

import json

import numpy as np
import pytest

from support import dsbs
from ucrlab.channelcap import MixedChannel
from ucrlab.errors import ValidationError
from ucrlab.probspace import ConditionalPmf
from ucrlab.serialize import (
    RunManifest,
    SCHEMA_VERSION,
    aux_from_dict,
    channel_from_dict,
    load_json,
    pmf_from_dict,
    source_from_dict,
    source_to_dict,
    write_csv,
    write_json,
)


class TestJsonDocuments:
    def test_load_reports_line_and_column(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text('{\n  "a": 1\n  "b": 2\n}\n')
        with pytest.raises(ValidationError, match=r"broken\.json:3:3"):
            load_json(bad)

    def test_load_requires_an_object(self, tmp_path):
        f = tmp_path / "arr.json"
        f.write_text("[1, 2]\n")
        with pytest.raises(ValidationError, match="top-level"):
            load_json(f)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="cannot read"):
            load_json(tmp_path / "absent.json")

    def test_write_json_is_deterministic(self, tmp_path):
        f = tmp_path / "doc.json"
        write_json(f, {"b": 2, "a": [1.5, True]})
        text = f.read_text()
        assert text == '{\n  "a": [\n    1.5,\n    true\n  ],\n  "b": 2\n}\n'
        assert json.loads(text) == {"a": [1.5, True], "b": 2}

    def test_write_json_refuses_nan(self, tmp_path):
        with pytest.raises(ValueError):
            write_json(tmp_path / "nan.json", {"x": float("nan")})


class TestCsv:
    def test_rfc4180_line_endings_and_cell_forms(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, ["idx", "flag", "val"], [[1, True, 0.1], [2, False, 2.0]])
        raw = f.read_bytes()
        assert raw == (b"idx,flag,val\r\n"
                       b"1,true,0.1\r\n"
                       b"2,false,2.0\r\n")

    def test_quoting_of_embedded_commas(self, tmp_path):
        f = tmp_path / "q.csv"
        write_csv(f, ["name"], [["a,b"]])
        assert f.read_bytes() == b'name\r\n"a,b"\r\n'


class TestSourceSpecs:
    def test_flat_and_matrix_probs_agree(self):
        flat = source_from_dict({"alphabet_x": 2, "alphabet_y": 2,
                                 "probs": [0.45, 0.05, 0.05, 0.45]})
        mat = source_from_dict({"alphabet_x": 2, "alphabet_y": 2,
                                "probs": [[0.45, 0.05], [0.05, 0.45]]})
        assert np.array_equal(flat.probs, mat.probs)
        assert np.array_equal(flat.probs, dsbs(0.1).probs)

    def test_round_trip(self):
        src = dsbs(0.05)
        again = source_from_dict(source_to_dict(src))
        assert np.array_equal(src.probs, again.probs)

    def test_entry_count_mismatch(self):
        with pytest.raises(ValidationError, match="entries"):
            source_from_dict({"alphabet_x": 2, "alphabet_y": 2,
                              "probs": [0.5, 0.5]})

    def test_missing_key(self):
        with pytest.raises(ValidationError, match="alphabet_y"):
            source_from_dict({"alphabet_x": 2, "probs": [1.0]})

    def test_pmf_spec(self):
        assert pmf_from_dict({"probs": [0.25, 0.75]}).probs.tolist() == [0.25, 0.75]


class TestChannelSpecs:
    def test_bsc_kind(self):
        w = channel_from_dict({"kind": "bsc", "payload": {"p": 0.11}})
        assert isinstance(w, ConditionalPmf)
        assert w.rows[0, 1] == pytest.approx(0.11)

    def test_bec_kind(self):
        w = channel_from_dict({"kind": "bec", "payload": {"e": 0.3}})
        assert w.n_out == 3

    def test_dmc_kind(self):
        w = channel_from_dict({"kind": "dmc",
                               "payload": {"rows": [[0.9, 0.1], [0.2, 0.8]]}})
        assert w.rows[1, 0] == pytest.approx(0.2)

    def test_mixed_kind(self):
        spec = {"kind": "mixed", "payload": {"components": [
            {"weight": 0.5, "channel": {"kind": "bsc", "payload": {"p": 0.0}}},
            {"weight": 0.5, "channel": {"kind": "bsc", "payload": {"p": 0.5}}},
        ]}}
        k = channel_from_dict(spec)
        assert isinstance(k, MixedChannel)
        assert len(k.components) == 2

    def test_nested_mixture_is_rejected(self):
        inner = {"kind": "mixed", "payload": {"components": [
            {"weight": 1.0, "channel": {"kind": "bsc", "payload": {"p": 0.1}}},
        ]}}
        spec = {"kind": "mixed", "payload": {"components": [
            {"weight": 1.0, "channel": inner},
        ]}}
        with pytest.raises(ValidationError, match="nest"):
            channel_from_dict(spec)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError, match="unknown kind"):
            channel_from_dict({"kind": "awgn", "payload": {}})


class TestAuxSpecs:
    def test_identity_defaults_to_square(self):
        aux = aux_from_dict({"kind": "identity"}, x_card=2)
        assert (aux.x_card, aux.u_card) == (2, 2)

    def test_matrix_kind_checks_the_input_alphabet(self):
        with pytest.raises(ValidationError, match="input rows"):
            aux_from_dict({"kind": "matrix", "rows": [[0.5, 0.5]]}, x_card=2)

    def test_constant_kind(self):
        aux = aux_from_dict({"kind": "constant"}, x_card=3)
        assert aux.u_card == 1


class TestManifest:
    def test_round_trip(self, tmp_path):
        m = RunManifest(command="capacity", config={"tol": 1e-9}, seed=7,
                        outputs={"result": "capacity.json"},
                        duration_seconds=0.25)
        path = tmp_path / "manifest.json"
        m.write(path)
        again = RunManifest.load(path)
        assert again.command == "capacity"
        assert again.config == {"tol": 1e-9}
        assert again.seed == 7
        assert again.outputs == {"result": "capacity.json"}
        assert again.schema_version == SCHEMA_VERSION

    def test_schema_version_gate(self, tmp_path):
        m = RunManifest(command="capacity", config={}, seed=0, outputs={},
                        duration_seconds=0.0)
        doc = m.to_dict()
        doc["schema_version"] = SCHEMA_VERSION + 1
        path = tmp_path / "manifest.json"
        write_json(path, doc)
        with pytest.raises(ValidationError, match="schema_version"):
            RunManifest.load(path)
