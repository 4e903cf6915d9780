import math

import pytest
import torch

from viewscout.model import (
    CompositionNet,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
    sine_embed,
)
from viewscout.model.network import grid_coords

torch.manual_seed(0)


@pytest.fixture(scope="module")
def small_model():
    return CompositionNet(ModelConfig(input_short=96, input_long=128)).eval()


def rand_images(b, h, w, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(b, 3, h, w, generator=g)


class TestEncode:
    def test_grid_shape_192x256(self):
        model = CompositionNet(ModelConfig(input_short=192, input_long=256)).eval()
        grid = model.encode(rand_images(1, 192, 256))
        assert (grid.rows, grid.cols) == (12, 16)
        assert int(grid.visible.sum()) == 192
        assert grid.tokens.shape == (1, 12, 16, 128)

    def test_deterministic(self, small_model):
        imgs = rand_images(2, 96, 128)
        a = small_model.encode(imgs).tokens
        b = small_model.encode(imgs.clone()).tokens
        assert torch.equal(a, b)

    def test_batch_equivariance(self, small_model):
        imgs = rand_images(2, 96, 128, seed=3)
        fwd = small_model.encode(imgs).tokens
        swapped = small_model.encode(imgs.flip(0)).tokens
        assert torch.allclose(fwd.flip(0), swapped, atol=1e-6)

    def test_rejects_bad_input(self, small_model):
        with pytest.raises(ValueError):
            small_model.encode(torch.rand(1, 1, 96, 128))
        with pytest.raises(ValueError):
            small_model.encode(torch.rand(1, 3, 100, 128))

    def test_visible_coords_inside_unit(self, small_model):
        grid = small_model.encode(rand_images(1, 96, 128))
        assert grid.coords.min() > 0 and grid.coords.max() < 1


class TestExtrapolate:
    def test_margin_zero_identity(self, small_model):
        grid = small_model.encode(rand_images(1, 96, 128))
        out = small_model.extrapolate(grid, 0)
        assert out is grid

    def test_shape_bookkeeping_margin4(self):
        model = CompositionNet(ModelConfig(input_short=192, input_long=256)).eval()
        grid = model.encode(rand_images(1, 192, 256))
        out = model.extrapolate(grid, 4)
        assert (out.rows, out.cols) == (20, 24)
        assert int(out.visible.sum()) == 192
        assert int((~out.visible).sum()) == 480 - 192

    def test_token_count_bookkeeping(self, small_model):
        grid = small_model.encode(rand_images(1, 96, 128))
        for m in (1, 2, 3):
            out = small_model.extrapolate(grid, m)
            assert out.rows * out.cols == (6 + 2 * m) * (8 + 2 * m)
            assert int(out.visible.sum()) + int((~out.visible).sum()) == out.rows * out.cols

    def test_visible_tokens_unchanged(self, small_model):
        grid = small_model.encode(rand_images(1, 96, 128))
        out = small_model.extrapolate(grid, 2)
        inner = out.tokens[:, 2:8, 2:10, :]
        assert torch.equal(inner, grid.tokens)

    def test_padded_coords_outside_unit(self, small_model):
        grid = small_model.encode(rand_images(1, 96, 128))
        out = small_model.extrapolate(grid, 2)
        pad_coords = out.coords[~out.visible]
        outside = (pad_coords < 0) | (pad_coords > 1)
        assert bool(outside.any(dim=-1).all())

    def test_perturbation_propagates(self, small_model):
        grid = small_model.encode(rand_images(1, 96, 128))
        out = small_model.extrapolate(grid, 2)
        bumped = grid.tokens.clone()
        bumped[0, 3, 4, :] += 0.5
        from viewscout.model.network import TokenGrid

        grid2 = TokenGrid(bumped, grid.coords, grid.visible, 0)
        out2 = small_model.extrapolate(grid2, 2)
        pad_a = out.tokens[:, ~out.visible]
        pad_b = out2.tokens[:, ~out2.visible]
        assert not torch.allclose(pad_a, pad_b)

    def test_negative_margin_rejected(self, small_model):
        grid = small_model.encode(rand_images(1, 96, 128))
        with pytest.raises(ValueError):
            small_model.extrapolate(grid, -1)


class TestDecode:
    def test_set_size_and_ranges(self, small_model):
        preds, _ = small_model(rand_images(3, 96, 128, seed=5))
        assert preds.boxes.shape == (3, 16, 4)
        assert preds.confidences.shape == (3, 16)
        assert (preds.boxes[..., :2] > -0.5).all() and (preds.boxes[..., :2] < 1.5).all()
        assert (preds.boxes[..., 2:] > 0).all() and (preds.boxes[..., 2:] < 2).all()
        assert (preds.confidences >= 0).all() and (preds.confidences <= 1).all()

    def test_anchor_shuffle_permutes_outputs(self, small_model):
        imgs = rand_images(1, 96, 128, seed=7)
        preds, _ = small_model(imgs)
        perm = torch.randperm(16, generator=torch.Generator().manual_seed(1))
        with torch.no_grad():
            orig = small_model.anchors.weight.clone()
            small_model.anchors.weight.copy_(orig[perm])
        try:
            shuffled, _ = small_model(imgs)
        finally:
            with torch.no_grad():
                small_model.anchors.weight.copy_(orig)
        assert torch.allclose(preds.boxes[:, perm], shuffled.boxes, atol=1e-5)

    def test_forward_deterministic(self, small_model):
        imgs = rand_images(2, 96, 128, seed=9)
        a, _ = small_model(imgs)
        b, _ = small_model(imgs)
        assert torch.equal(a.boxes, b.boxes) and torch.equal(a.confidences, b.confidences)

    def test_portrait_input(self, small_model):
        preds, grid = small_model(rand_images(1, 128, 96))
        assert (grid.rows, grid.cols) == (8 + 4, 6 + 4)
        assert preds.boxes.shape == (1, 16, 4)


class TestPositionalEmbedding:
    def test_pure_function_of_coords(self):
        coords = torch.tensor([[0.25, 0.75], [0.25, 0.75], [1.25, -0.25]])
        emb = sine_embed(coords, 128)
        assert torch.equal(emb[0], emb[1])
        assert not torch.equal(emb[0], emb[2])

    def test_coords_affine_in_index(self):
        coords = grid_coords(10, 12, margin=2)
        dx = coords[0, 1, 0] - coords[0, 0, 0]
        for j in range(11):
            assert coords[0, j + 1, 0] - coords[0, j, 0] == pytest.approx(float(dx), abs=1e-6)


class TestCheckpoint:
    def test_roundtrip(self, tmp_path, small_model):
        path = tmp_path / "model.pt"
        save_checkpoint(small_model, path)
        loaded = load_checkpoint(path)
        assert loaded.config == small_model.config
        imgs = rand_images(1, 96, 128, seed=11)
        a, _ = small_model(imgs)
        b, _ = loaded(imgs)
        assert torch.allclose(a.boxes, b.boxes, atol=1e-7)

    def test_version_check(self, tmp_path, small_model):
        path = tmp_path / "model.pt"
        save_checkpoint(small_model, path)
        payload = torch.load(path, weights_only=True)
        payload["version"] = "other"
        torch.save(payload, path)
        with pytest.raises(ValueError):
            load_checkpoint(path)


class TestConfig:
    def test_auto_margin(self):
        cfg = ModelConfig(input_short=96, input_long=128)
        assert cfg.margin == math.ceil(0.25 * 6)
        cfg2 = ModelConfig(input_short=192, input_long=256)
        assert cfg2.margin == 3

    def test_input_size_by_orientation(self):
        cfg = ModelConfig()
        assert cfg.input_size("landscape") == (96, 128)
        assert cfg.input_size("portrait") == (128, 96)
