"""Checkpoint serialization: bit-exact round trips and corruption rejection."""

import numpy as np
import pytest

from kdiag.checkpoint import (
    load_checkpoint,
    load_policy_artifact,
    save_checkpoint,
    save_dual_checkpoint,
)
from kdiag.classifiers import MlpParams, init_mlp
from kdiag.errors import ArtifactError
from kdiag.policy import PolicyParams, init_policy
from kdiag.variants import DualPolicyParams


class TestRoundTrip:
    def test_classifier_round_trip_bit_exact(self, tmp_path):
        params = init_mlp(256, 32, 2, 7)
        path = tmp_path / "cls.ckpt"
        save_checkpoint(path, params, "classifier", {"task": "disease", "seed": 7})
        back, meta = load_checkpoint(path)
        assert isinstance(back, MlpParams) and not isinstance(back, PolicyParams)
        assert np.array_equal(back.to_flat(), params.to_flat())
        assert meta["task"] == "disease"
        assert meta["d_in"] == 256 and meta["hidden"] == 32 and meta["n_out"] == 2
        save_checkpoint(tmp_path / "cls2.ckpt", back, "classifier", {"task": "disease", "seed": 7})
        assert path.read_bytes() == (tmp_path / "cls2.ckpt").read_bytes()

    def test_policy_round_trip(self, tmp_path):
        params = init_policy(64, 16, 32, 3)
        path = tmp_path / "pol.ckpt"
        save_checkpoint(path, params, "policy", {"variant": "weighted", "seed": 3})
        back, meta = load_policy_artifact(path)
        assert isinstance(back, PolicyParams)
        assert np.array_equal(back.to_flat(), params.to_flat())
        assert meta["variant"] == "weighted"

    def test_dual_round_trip(self, tmp_path):
        dual = DualPolicyParams(init_policy(64, 16, 32, 1), init_policy(64, 16, 32, 2))
        path = tmp_path / "dual.ckpt"
        save_dual_checkpoint(path, dual, {"variant": "varying", "seed": 1})
        back, meta = load_policy_artifact(path)
        assert isinstance(back, DualPolicyParams)
        assert np.array_equal(back.disease_policy.to_flat(), dual.disease_policy.to_flat())
        assert np.array_equal(back.severity_policy.to_flat(), dual.severity_policy.to_flat())
        assert meta["variant"] == "varying"


class TestCorruption:
    def make(self, tmp_path):
        params = init_mlp(8, 4, 2, 1)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, "classifier", {"seed": 1})
        return path

    def test_bad_magic(self, tmp_path):
        path = self.make(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(ArtifactError, match="magic"):
            load_checkpoint(path)

    def test_truncated_params(self, tmp_path):
        path = self.make(tmp_path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ArtifactError):
            load_checkpoint(path)

    def test_truncated_header(self, tmp_path):
        path = self.make(tmp_path)
        path.write_bytes(path.read_bytes()[:6])
        with pytest.raises(ArtifactError):
            load_checkpoint(path)

    def test_dual_manifest_missing_role(self, tmp_path):
        dual = DualPolicyParams(init_policy(8, 4, 16, 1), init_policy(8, 4, 16, 2))
        path = tmp_path / "dual.ckpt"
        save_dual_checkpoint(path, dual)
        path.write_text("disease\tdual.ckpt.disease\n")
        with pytest.raises(ArtifactError):
            load_policy_artifact(path)

    def test_classifier_rejected_as_policy(self, tmp_path):
        path = self.make(tmp_path)
        with pytest.raises(ArtifactError):
            load_policy_artifact(path)
