import numpy as np
import pytest

import damkit.numcore as nc
from damkit.backbone import (
    BackboneConfig,
    EmptyInputError,
    embed_view,
    encode_global,
    encode_regional,
    extract_patches,
    forward,
    forward_video,
    init_backbone_params,
)
from damkit.geometry import Image, RegionMask, build_focal_prompt

CFG = BackboneConfig()


def random_prompt(seed, size=64, enc_res=32, min_side=48):
    rng = np.random.default_rng(seed)
    img = Image(rng.random((size, size, 3)))
    data = np.zeros((size, size), dtype=bool)
    x0, y0 = rng.integers(0, size - 8, size=2)
    data[y0:y0 + 8, x0:x0 + 8] = True
    return build_focal_prompt(img, RegionMask(data), 3.0, min_side, enc_res)


def fresh_view(seed, cfg=CFG):
    rng = np.random.default_rng(seed)
    img = Image(rng.random((cfg.enc_res, cfg.enc_res, 3)))
    mask = RegionMask(rng.random((cfg.enc_res, cfg.enc_res)) < 0.3)
    return img, mask


class TestConfig:
    def test_token_count(self):
        assert CFG.tokens == 64 and CFG.grid == 8

    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            BackboneConfig(enc_res=30, patch=4)
        with pytest.raises(ValueError):
            BackboneConfig(dim=30, heads=4)

    def test_json_round_trip(self):
        cfg = BackboneConfig(enc_res=16, patch=4, dim=16)
        assert BackboneConfig.from_json(cfg.to_json()) == cfg


class TestInit:
    def test_mask_embedding_and_gates_start_at_zero(self):
        params = init_backbone_params(CFG, seed=3)
        assert np.all(params.mask_w.data == 0.0)
        assert np.all(params.mask_b.data == 0.0)
        for a in params.adapters:
            assert float(a.gamma.data) == 0.0
            assert float(a.beta.data) == 0.0

    def test_seeded_init_is_deterministic(self):
        a = init_backbone_params(CFG, seed=5)
        b = init_backbone_params(CFG, seed=5)
        for pa, pb in zip(a.params(), b.params()):
            assert np.array_equal(pa.data, pb.data)


class TestPatches:
    def test_row_major_token_order(self):
        res, patch = 8, 4
        arr = np.zeros((res, res, 3))
        arr[0, 4] = 1.0  # top-right patch of a 2x2 grid
        tokens = extract_patches(arr, patch)
        assert tokens.shape == (4, 48)
        assert tokens[1].sum() > 0 and tokens[0].sum() == 0


class TestEmbedView:
    def test_mask_invariance_at_zero_init(self):
        params = init_backbone_params(CFG, seed=0)
        img, _ = fresh_view(1)
        a = embed_view(img, RegionMask.zeros(32, 32), params, CFG)
        ones = RegionMask.full(32, 32)
        b = embed_view(img, ones, params, CFG)
        assert np.array_equal(a.seq.data, b.seq.data)

    def test_black_image_zero_bias_gives_positions(self):
        params = init_backbone_params(CFG, seed=0)
        black = Image(np.zeros((32, 32, 3)))
        out = embed_view(black, RegionMask.full(32, 32), params, CFG)
        assert np.array_equal(out.seq.data, params.pos.data)

    def test_trained_mask_embedding_is_per_token_local(self):
        params = init_backbone_params(CFG, seed=0)
        rng = np.random.default_rng(2)
        params.mask_w.data[...] = rng.normal(size=params.mask_w.shape)
        img, _ = fresh_view(3)
        base_mask = RegionMask.zeros(32, 32)
        out0 = embed_view(img, base_mask, params, CFG).seq.data
        flipped = RegionMask.zeros(32, 32)
        flipped.data[0:4, 4:8] = True  # exactly patch (row 0, col 1) -> token 1
        out1 = embed_view(img, flipped, params, CFG).seq.data
        changed = np.where(np.any(out0 != out1, axis=1))[0]
        assert list(changed) == [1]

    def test_wrong_resolution_rejected(self):
        params = init_backbone_params(CFG, seed=0)
        img = Image(np.zeros((16, 16, 3)))
        with pytest.raises(nc.ShapeMismatchError):
            embed_view(img, RegionMask.full(16, 16), params, CFG)


class TestEncodeGlobal:
    def test_identity_weights_pass_input_through(self):
        params = init_backbone_params(CFG, seed=4)
        for b in params.blocks:
            # zero the attention value+output path and the FFN output
            b.qkv_w.data[:, 2 * CFG.dim:] = 0.0
            b.qkv_b.data[2 * CFG.dim:] = 0.0
            b.proj_w.data[...] = 0.0
            b.proj_b.data[...] = 0.0
            b.ffn2_w.data[...] = 0.0
            b.ffn2_b.data[...] = 0.0
        img, mask = fresh_view(5)
        x = embed_view(img, mask, params, CFG)
        z = encode_global(x, params, CFG)
        assert np.array_equal(z.seq.data, x.seq.data)

    def test_permutation_equivariance(self):
        params = init_backbone_params(CFG, seed=6)
        img, mask = fresh_view(7)
        x = embed_view(img, mask, params, CFG)
        perm = np.random.default_rng(8).permutation(CFG.tokens)
        z = encode_global(x, params, CFG).seq.data
        x_perm = type(x)(nc.constant(x.seq.data[perm]), "global")
        z_perm = encode_global(x_perm, params, CFG).seq.data
        assert np.allclose(z_perm, z[perm], atol=1e-12)

    def test_output_shape(self):
        cfg = BackboneConfig(enc_res=16, patch=4, dim=16, heads=4, layers=3)
        params = init_backbone_params(cfg, seed=9)
        rng = np.random.default_rng(10)
        img = Image(rng.random((16, 16, 3)))
        z = encode_global(embed_view(img, RegionMask.full(16, 16), params, cfg), params, cfg)
        assert z.seq.shape == (cfg.tokens, cfg.dim)


class TestEncodeRegional:
    def test_zero_gates_equal_global_encoder_bitwise(self):
        params = init_backbone_params(CFG, seed=11)
        img, mask = fresh_view(12)
        img2, mask2 = fresh_view(13)
        x_prime = embed_view(img, mask, params, CFG)
        z = encode_global(embed_view(img2, mask2, params, CFG), params, CFG)
        regional = encode_regional(x_prime, z, params, CFG)
        plain = encode_global(x_prime, params, CFG)
        assert np.array_equal(regional.seq.data, plain.seq.data)

    def test_gate_is_tanh_bounded(self):
        # Large gates saturate: the adapter contribution never exceeds 1x.
        assert np.tanh(1e6) == 1.0  # float64 rounds the open bound to 1 here
        assert abs(np.tanh(18.0)) < 1.0
        assert abs(np.tanh(-18.0)) < 1.0
        params = init_backbone_params(CFG, seed=14)
        img, mask = fresh_view(140)
        img2, mask2 = fresh_view(141)
        x_prime = embed_view(img, mask, params, CFG)
        z = encode_global(embed_view(img2, mask2, params, CFG), params, CFG)
        for a in params.adapters:
            a.gamma.data[...] = 1e6
            a.beta.data[...] = 1e6
        saturated = encode_regional(x_prime, z, params, CFG).seq.data
        for a in params.adapters:
            a.gamma.data[...] = 1e9  # even larger gates change nothing
            a.beta.data[...] = 1e9
        saturated2 = encode_regional(x_prime, z, params, CFG).seq.data
        assert np.array_equal(saturated, saturated2)

    def test_global_features_matter_only_with_open_gates(self):
        params = init_backbone_params(CFG, seed=15)
        img, mask = fresh_view(16)
        imgA, maskA = fresh_view(17)
        imgB, maskB = fresh_view(18)
        x_prime = embed_view(img, mask, params, CFG)
        zA = encode_global(embed_view(imgA, maskA, params, CFG), params, CFG)
        zB = encode_global(embed_view(imgB, maskB, params, CFG), params, CFG)
        closed_A = encode_regional(x_prime, zA, params, CFG).seq.data
        closed_B = encode_regional(x_prime, zB, params, CFG).seq.data
        assert np.array_equal(closed_A, closed_B)
        for a in params.adapters:
            a.gamma.data[...] = 0.5
            a.beta.data[...] = 0.25
        open_A = encode_regional(x_prime, zA, params, CFG).seq.data
        open_B = encode_regional(x_prime, zB, params, CFG).seq.data
        assert not np.array_equal(open_A, open_B)


class TestForward:
    def test_token_count_preserved(self):
        params = init_backbone_params(CFG, seed=19)
        for seed in range(5):
            out = forward(random_prompt(seed), params, CFG)
            assert out.seq.shape == (CFG.tokens, CFG.dim)
            assert out.provenance == "regional"

    def test_full_mask_zero_init_matches_plain_global_encoding(self):
        params = init_backbone_params(CFG, seed=20)
        rng = np.random.default_rng(21)
        img = Image(rng.random((48, 48, 3)))
        prompt = build_focal_prompt(img, RegionMask.full(48, 48), 3.0, 48, 32)
        out = forward(prompt, params, CFG)
        plain = encode_global(
            embed_view(prompt.full_image, RegionMask.zeros(32, 32), params, CFG), params, CFG
        )
        assert np.array_equal(out.seq.data, plain.seq.data)

    def test_weight_sharing_probe(self):
        params = init_backbone_params(CFG, seed=22)
        for a in params.adapters:  # open the gates so the regional path is distinct
            a.gamma.data[...] = 0.3
            a.beta.data[...] = 0.3
        prompt = random_prompt(23)
        x = embed_view(prompt.full_image, prompt.full_mask, params, CFG)
        x_prime = embed_view(prompt.focal_image, prompt.focal_mask, params, CFG)
        z0 = encode_global(x, params, CFG)
        r0 = encode_regional(x_prime, z0, params, CFG).seq.data.copy()
        g0 = z0.seq.data.copy()
        params.blocks[0].qkv_w.data[0, 0] += 0.05  # mutate a shared self-attention weight
        z1 = encode_global(x, params, CFG)
        r1 = encode_regional(x_prime, z1, params, CFG).seq.data
        assert not np.array_equal(g0, z1.seq.data)
        assert not np.array_equal(r0, r1)

    def test_gradients_flow_to_gates_and_mask_embedding(self):
        params = init_backbone_params(CFG, seed=24)
        prompt = random_prompt(25)
        out = forward(prompt, params, CFG)
        loss = nc.cross_entropy_lastdim(out.seq, np.zeros(CFG.tokens, dtype=int))
        loss.backward()
        assert np.any(params.mask_w.grad != 0.0)
        assert float(params.adapters[0].gamma.grad) != 0.0


class TestForwardVideo:
    def test_single_frame_equals_forward(self):
        params = init_backbone_params(CFG, seed=26)
        prompt = random_prompt(27)
        single = forward(prompt, params, CFG).seq.data
        video = forward_video([prompt], params, CFG)
        assert np.array_equal(video.seq.data, single)
        assert video.provenance == "video"

    def test_three_frames_concatenate(self):
        params = init_backbone_params(CFG, seed=28)
        prompts = [random_prompt(s) for s in (29, 30, 31)]
        out = forward_video(prompts, params, CFG)
        assert out.seq.shape == (3 * CFG.tokens, CFG.dim)

    def test_frame_permutation_permutes_blocks(self):
        params = init_backbone_params(CFG, seed=32)
        prompts = [random_prompt(s) for s in (33, 34, 35)]
        base = forward_video(prompts, params, CFG).seq.data
        swapped = forward_video([prompts[2], prompts[0], prompts[1]], params, CFG).seq.data
        t = CFG.tokens
        assert np.array_equal(swapped[0:t], base[2 * t:3 * t])
        assert np.array_equal(swapped[t:2 * t], base[0:t])
        assert np.array_equal(swapped[2 * t:3 * t], base[t:2 * t])

    def test_empty_and_oversize_rejected(self):
        params = init_backbone_params(CFG, seed=36)
        with pytest.raises(EmptyInputError):
            forward_video([], params, CFG)
        prompt = random_prompt(37)
        with pytest.raises(ValueError):
            forward_video([prompt] * 9, params, CFG)
