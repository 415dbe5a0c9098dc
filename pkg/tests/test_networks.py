import numpy as np
import pytest
import torch

from shoulderct.errors import FormatError, ShapeError
from shoulderct.networks import (
    ConvBlock,
    DualDecoderUNet3D,
    MultiTaskStagingNet,
    PyramidalEdgeExtraction,
    SegmenterConfig,
    StagingConfig,
    forward_cls,
    forward_seg,
    load_checkpoint,
    save_checkpoint,
)


def conv_block_params(in_ch, out_ch):
    # conv k3 + bias, bn affine, twice
    return 27 * out_ch * (in_ch + out_ch) + 6 * out_ch


def test_parameter_count_closed_form():
    net = DualDecoderUNet3D(SegmenterConfig(levels=2, base_features=8))
    feats = [8, 16, 32]
    expected = conv_block_params(1, 8) + conv_block_params(8, 16)       # encoders
    expected += conv_block_params(16, 32)                               # bottleneck
    for lo, hi in ((8, 16), (16, 32)):
        expected += 2 * (27 * hi * lo + lo)                             # two upsample convs
    expected += conv_block_params(32, 16) + conv_block_params(16, 8)    # contour blocks
    expected += (3 * 16 * 16 + 16) + (3 * 8 * 8 + 8)                    # pee fusions
    expected += conv_block_params(48, 16) + conv_block_params(24, 8)    # region blocks
    expected += 2 * (8 * 3 + 3)                                         # heads
    assert net.parameter_count == expected


def test_region_probs_sum_to_one_and_shapes_match():
    net = DualDecoderUNet3D(SegmenterConfig(levels=2, base_features=4))
    region, edges = forward_seg(net, np.random.rand(16, 16, 16).astype(np.float32))
    assert region.shape == (3, 16, 16, 16)
    assert edges.shape == region.shape
    assert np.allclose(region.sum(axis=0), 1.0, atol=1e-6)
    assert (edges > 0).all() and (edges < 1).all()


def test_skip_connections_join_equal_shapes():
    net = DualDecoderUNet3D(SegmenterConfig(levels=3, base_features=2))
    shapes = {}

    def record(name):
        def hook(mod, inp, out):
            shapes.setdefault(name, []).append(tuple(out.shape[2:]))
        return hook

    for i, enc in enumerate(net.encoders):
        enc.register_forward_hook(record(f"enc{i}"))
    for i, up in enumerate(net.up_region):
        up.register_forward_hook(record(f"up{i}"))
    net.eval()
    with torch.no_grad():
        net(torch.rand(1, 1, 40, 40, 40))
    # decoder level i consumes encoder skip levels-1-i
    for i in range(3):
        assert shapes[f"up{i}"][0] == shapes[f"enc{2 - i}"][0]


def test_indivisible_input_raises():
    net = DualDecoderUNet3D(SegmenterConfig(levels=2, base_features=4))
    with pytest.raises(ShapeError):
        net(torch.rand(1, 1, 18, 16, 16))


def test_pee_constant_input_constant_output():
    pee = PyramidalEdgeExtraction(4)
    pee.eval()
    x = torch.full((1, 4, 8, 8, 8), 3.25)
    with torch.no_grad():
        out = pee(x)
    assert out.shape == x.shape
    flat = out.reshape(4, -1)
    assert torch.allclose(flat, flat[:, :1].expand_as(flat), atol=1e-6)


def test_pee_impulse_matches_box_filter_oracle():
    pee = PyramidalEdgeExtraction(1, pool_sizes=(3,))
    with torch.no_grad():
        pee.fuse.weight.zero_()
        pee.fuse.bias.zero_()
        pee.fuse.weight[0, 1, 0, 0, 0] = 1.0  # select the e_3 channel verbatim
    x = torch.zeros(1, 1, 9, 9, 9)
    x[0, 0, 4, 4, 4] = 1.0
    with torch.no_grad():
        e3 = pee(x)[0, 0]
    # direct convolution oracle at interior voxels: mean over the 3^3 box
    assert e3[4, 4, 4] == pytest.approx(1.0 - 1.0 / 27.0, abs=1e-6)
    assert e3[3, 4, 4] == pytest.approx(-1.0 / 27.0, abs=1e-6)
    assert e3[6, 4, 4] == pytest.approx(0.0, abs=1e-6)


def test_pee_too_small_input_raises():
    pee = PyramidalEdgeExtraction(2)
    with pytest.raises(ShapeError):
        pee(torch.rand(1, 2, 3, 3, 3))


def test_stager_channel_trace_design_a():
    cfg = StagingConfig(blocks=7, base_features=48, input_size=160)
    assert cfg.channel_trace == (48, 48, 96, 96, 192, 192, 384)


def test_stager_spatial_trace_floor_pooling():
    cfg = StagingConfig(blocks=7, base_features=16, input_size=160)
    assert cfg.spatial_trace == (160, 80, 40, 20, 10, 5, 2, 1)


def test_stager_heads_sum_to_one():
    net = MultiTaskStagingNet(StagingConfig(blocks=3, base_features=4, input_size=16))
    probs = forward_cls(net, np.random.rand(16, 16, 16).astype(np.float32))
    assert set(probs) == {"os", "js", "hsa"}
    assert probs["os"].shape == (3,) and probs["hsa"].shape == (2,)
    for p in probs.values():
        assert p.sum() == pytest.approx(1.0, abs=1e-6)
        assert (p > 0).all() and (p < 1).all()


def test_stager_rejects_wrong_input_size():
    net = MultiTaskStagingNet(StagingConfig(blocks=3, base_features=4, input_size=16))
    with pytest.raises(ShapeError):
        net(torch.rand(1, 1, 32, 32, 32))


def test_stager_too_small_config_raises():
    with pytest.raises(ShapeError):
        StagingConfig(blocks=8, base_features=4, input_size=8)


def test_inference_deterministic():
    net = MultiTaskStagingNet(StagingConfig(blocks=3, base_features=4, input_size=16))
    patch = np.random.rand(16, 16, 16).astype(np.float32)
    a = forward_cls(net, patch)
    b = forward_cls(net, patch)
    for task in a:
        assert np.array_equal(a[task], b[task])


def test_batch_equals_concatenated_singles():
    net = DualDecoderUNet3D(SegmenterConfig(levels=2, base_features=4))
    net.eval()
    x = torch.rand(2, 1, 16, 16, 16)
    with torch.no_grad():
        batch_region, _ = net(x)
        single0, _ = net(x[:1])
        single1, _ = net(x[1:])
    assert torch.allclose(batch_region, torch.cat([single0, single1]), atol=1e-6)


def test_dropout_active_only_in_train_mode():
    net = MultiTaskStagingNet(StagingConfig(blocks=2, base_features=4, input_size=8, dropout=0.6))
    x = torch.rand(1, 1, 8, 8, 8)
    net.train()
    torch.manual_seed(0)
    a = net(x)[0]
    torch.manual_seed(1)
    b = net(x)[0]
    assert not torch.allclose(a, b)  # stochastic under dropout
    net.eval()
    assert torch.allclose(net(x)[0], net(x)[0])


def test_full_backprop_matches_finite_differences():
    torch.manual_seed(3)
    net = DualDecoderUNet3D(SegmenterConfig(levels=2, base_features=2)).double()
    net.train()
    x = torch.rand(1, 1, 16, 16, 16, dtype=torch.float64)
    target_r = torch.rand(1, 3, 16, 16, 16, dtype=torch.float64)
    target_e = torch.rand(1, 3, 16, 16, 16, dtype=torch.float64)

    def loss_fn():
        region, edges = net(x)
        return ((region - target_r) ** 2).mean() + ((edges - target_e) ** 2).mean()

    loss = loss_fn()
    loss.backward()
    params = [p for p in net.parameters() if p.grad is not None]
    g = np.random.default_rng(0)
    picks = []
    for _ in range(20):
        p = params[g.integers(len(params))]
        picks.append((p, int(g.integers(p.numel()))))
    h = 1e-6
    ana, fd = [], []
    with torch.no_grad():
        for p, idx in picks:
            ana.append(p.grad.reshape(-1)[idx].item())
            orig = p.reshape(-1)[idx].item()
            p.reshape(-1)[idx] = orig + h
            up = loss_fn().item()
            p.reshape(-1)[idx] = orig - h
            down = loss_fn().item()
            p.reshape(-1)[idx] = orig
            fd.append((up - down) / (2 * h))
    ana, fd = np.asarray(ana), np.asarray(fd)
    rel = np.linalg.norm(ana - fd) / max(np.linalg.norm(fd), 1e-12)
    assert rel < 1e-3, f"rel err {rel:.2e}"


def test_checkpoint_round_trip(tmp_path):
    net = MultiTaskStagingNet(StagingConfig(blocks=2, base_features=4, input_size=8))
    opt = torch.optim.Adam(net.parameters(), lr=1e-4)
    patch = np.random.rand(8, 8, 8).astype(np.float32)
    before = forward_cls(net, patch)
    path = tmp_path / "ckpt.pt"
    save_checkpoint(path, net, opt, epoch=7, extra={"note": "test"})
    restored, payload = load_checkpoint(path)
    after = forward_cls(restored, patch)
    for task in before:
        assert np.array_equal(before[task], after[task])
    assert payload["epoch"] == 7


def test_checkpoint_version_mismatch(tmp_path):
    net = MultiTaskStagingNet(StagingConfig(blocks=2, base_features=4, input_size=8))
    path = tmp_path / "ckpt.pt"
    save_checkpoint(path, net)
    payload = torch.load(path, weights_only=False)
    payload["format_version"] = 99
    torch.save(payload, path)
    with pytest.raises(FormatError):
        load_checkpoint(path)
