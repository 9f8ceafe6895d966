import numpy as np
import pytest
import torch

from outsketch.blocks import init_parameters, make_edge_detector, position_channels, split_halves
from outsketch.generator import (
    SCALES,
    ArchitectureScale,
    ConditionalSkip,
    Generator,
    get_scale,
    outpaint_steps,
)
from conftest import finite_difference_check, rand_image


def small_generator(scale="desk", seed=21):
    gen = Generator(scale)
    init_parameters(gen, seed)
    return gen


class TestScales:
    def test_registry(self):
        assert get_scale("full").half_hw == (128, 128)
        assert get_scale("desk").half_hw == (64, 64)
        assert get_scale("full").bottleneck == (4, 4, 512)
        assert get_scale("desk").bottleneck == (2, 2, 128)
        assert get_scale("full").hidden_size == 2048
        assert get_scale("desk").hidden_size == 256

    def test_unknown_scale(self):
        with pytest.raises(ValueError):
            get_scale("tiny")
        with pytest.raises(ValueError):
            ArchitectureScale("odd", (48, 48))


class TestShapeWalk:
    def test_full_scale_table(self):
        gen = small_generator("full", seed=1)
        enc = gen.context_encoder
        shapes = {}

        def tap(name):
            def hook(_m, _i, out):
                shapes[name] = tuple(out.shape)
            return hook

        hooks = [
            enc.image_stem.register_forward_hook(tap("image_stem")),
            enc.position_stem.register_forward_hook(tap("position_stem")),
            enc.down1.register_forward_hook(tap("down1")),
            enc.down2.register_forward_hook(tap("down2")),
            enc.res2.register_forward_hook(tap("res2")),
            enc.down3.register_forward_hook(tap("down3")),
            enc.res3.register_forward_hook(tap("res3")),
            enc.down4.register_forward_hook(tap("down4")),
            enc.res4.register_forward_hook(tap("res4")),
            enc.out.register_forward_hook(tap("enc_out")),
        ]
        dec = gen.decoder
        for i in range(3):
            hooks.append(dec.res_stages[i].register_forward_hook(tap(f"dec_res{i}")))
            hooks.append(dec.skips[i].register_forward_hook(tap(f"dec_skip{i}")))
            hooks.append(dec.ups[i].register_forward_hook(tap(f"dec_up{i}")))
        hooks.append(dec.up_tail1.register_forward_hook(tap("up_tail1")))
        hooks.append(dec.up_tail2.register_forward_hook(tap("up_tail2")))

        with torch.no_grad():
            image_left = torch.zeros(1, 3, 128, 128)
            sketch = torch.zeros(1, 1, 128, 128)
            out = gen(image_left, sketch, sketch)
        for h in hooks:
            h.remove()

        assert out.shape == (1, 3, 128, 256)
        expected = {
            "image_stem": (1, 64, 64, 64),      # gated conv over image+sketch
            "position_stem": (1, 64, 64, 64),   # plain conv over coordinates
            "down1": (1, 128, 32, 32),
            "down2": (1, 256, 16, 16),
            "res2": (1, 256, 16, 16),
            "down3": (1, 512, 8, 8),
            "res3": (1, 512, 8, 8),
            "down4": (1, 1024, 4, 4),
            "res4": (1, 1024, 4, 4),
            "enc_out": (1, 512, 4, 4),
            "dec_res0": (1, 512, 4, 8),
            "dec_skip0": (1, 512, 4, 4),
            "dec_up0": (1, 512, 8, 16),
            "dec_res1": (1, 512, 8, 16),
            "dec_skip1": (1, 512, 8, 8),
            "dec_up1": (1, 256, 16, 32),
            "dec_res2": (1, 256, 16, 32),
            "dec_skip2": (1, 256, 16, 16),
            "dec_up2": (1, 128, 32, 64),
            "up_tail1": (1, 64, 64, 128),
            "up_tail2": (1, 3, 128, 256),
        }
        for name, want in expected.items():
            assert shapes[name] == want, f"{name}: {shapes[name]} != {want}"

    def test_bridge_and_guidance_shapes(self):
        gen = small_generator("full", seed=2)
        with torch.no_grad():
            image_left = torch.zeros(2, 3, 128, 128)
            sketch = torch.zeros(2, 1, 128, 128)
            pos_l, pos_r = gen.canonical_positions(batch=2)
            left_b = gen.encode_context(image_left, sketch, pos_l)
            s_state, p_state, pyramid = gen.encode_guidance(sketch, pos_r)
            right_b = gen.predict_hidden_sequence(left_b, s_state, p_state)
        assert left_b.shape == (2, 512, 4, 4)
        assert s_state.shape == (2, 2048)
        assert p_state.shape == (2, 2048)
        assert right_b.shape == (2, 512, 4, 4)
        assert {k: tuple(v.shape) for k, v in pyramid.s_levels.items()} == {
            4: (2, 512, 4, 4), 8: (2, 512, 8, 8), 16: (2, 256, 16, 16)}

    def test_desk_forward(self):
        gen = small_generator()
        out = gen(torch.zeros(2, 3, 64, 64), torch.zeros(2, 1, 64, 64),
                  torch.zeros(2, 1, 64, 64))
        assert out.shape == (2, 3, 64, 128)
        assert out.abs().max() <= 1.0  # tanh output range

    def test_input_validation(self):
        gen = small_generator()
        with pytest.raises(ValueError):
            gen(torch.zeros(1, 3, 32, 32), torch.zeros(1, 1, 64, 64),
                torch.zeros(1, 1, 64, 64))
        with pytest.raises(ValueError):
            gen(torch.zeros(1, 4, 64, 64), torch.zeros(1, 1, 64, 64),
                torch.zeros(1, 1, 64, 64))


class TestConditionalSkip:
    def test_zero_init_exact_identity(self):
        skip = ConditionalSkip(8, 4, 4)
        init_parameters(skip, 3)
        d = torch.randn(2, 8, 6, 6)
        s = torch.randn(2, 4, 6, 6)
        p = torch.randn(2, 4, 6, 6)
        assert torch.equal(skip(d, s, p), d)
        assert skip.out.conv.zero_init is True

    def test_nonzero_after_perturbation(self):
        skip = ConditionalSkip(4, 2, 2)
        init_parameters(skip, 4)
        with torch.no_grad():
            skip.out.conv.weight.fill_(0.01)
        d = torch.randn(1, 4, 5, 5)
        out = skip(d, torch.randn(1, 2, 5, 5), torch.randn(1, 2, 5, 5))
        assert not torch.equal(out, d)

    def test_spatial_mismatch(self):
        skip = ConditionalSkip(4, 2, 2)
        with pytest.raises(ValueError):
            skip(torch.zeros(1, 4, 4, 4), torch.zeros(1, 2, 8, 8), torch.zeros(1, 2, 4, 4))

    def test_decode_invariant_to_sketch_at_init(self):
        gen = small_generator(seed=5)
        with torch.no_grad():
            image_left = rand_image(np.random.default_rng(0), (1, 3, 64, 64),
                                    dtype=torch.float32)
            sk_a = torch.zeros(1, 1, 64, 64)
            sk_b = torch.ones(1, 1, 64, 64)
            pos_l, pos_r = gen.canonical_positions()
            left_b = gen.encode_context(image_left, sk_a, pos_l)
            _, _, pyr_a = gen.encode_guidance(sk_a, pos_r)
            _, _, pyr_b = gen.encode_guidance(sk_b, pos_r)
            right_b = torch.randn(1, 128, 2, 2)
            out_a = gen.decode_full(left_b, right_b, pyr_a)
            out_b = gen.decode_full(left_b, right_b, pyr_b)
        assert torch.equal(out_a, out_b)


class TestBridge:
    def test_fusion_is_additive(self):
        gen = small_generator(seed=6)
        rng = np.random.default_rng(1)
        left_b = rand_image(rng, (2, 128, 2, 2), dtype=torch.float32)
        s = rand_image(rng, (2, 256), dtype=torch.float32)
        p = rand_image(rng, (2, 256), dtype=torch.float32)
        delta = rand_image(rng, (2, 256), dtype=torch.float32)
        with torch.no_grad():
            a = gen.predict_hidden_sequence(left_b, s + delta, p - delta)
            b = gen.predict_hidden_sequence(left_b, s, p)
        assert torch.allclose(a, b, atol=1e-5)

    def test_deterministic(self):
        gen = small_generator(seed=7)
        x = torch.randn(1, 3, 64, 64)
        sk = torch.zeros(1, 1, 64, 64)
        with torch.no_grad():
            a = gen(x, sk, sk)
            b = gen(x, sk, sk)
        assert torch.equal(a, b)


class TestPositions:
    def test_canonical_positions_match_formula(self):
        gen = Generator("desk")
        pos_l, pos_r = gen.canonical_positions()
        full = position_channels(64, 128)
        want_l, want_r = split_halves(full, axis=1)
        assert np.array_equal(pos_l[0].permute(1, 2, 0).numpy(), want_l)
        assert np.array_equal(pos_r[0].permute(1, 2, 0).numpy(), want_r)
        # left-half x strictly below right-half x, column for column
        assert (pos_l[0, 0] < pos_r[0, 0]).all()


class TestEndToEndGradient:
    def test_finite_differences_desk(self):
        rng = np.random.default_rng(30)
        gen = small_generator(seed=8).double()
        image_left = rand_image(rng, (1, 3, 64, 64)).requires_grad_(True)
        sk_l = torch.zeros(1, 1, 64, 64, dtype=torch.float64)
        sk_r = torch.as_tensor(
            (rng.uniform(0, 1, (1, 1, 64, 64)) > 0.8).astype(np.float64))

        def fn(img):
            return gen(img, sk_l, sk_r).sum()

        err = finite_difference_check(fn, [image_left], rng, n_probes=3)
        assert err < 1e-3


class TestOutpaintSteps:
    def test_width_recurrence(self):
        gen = small_generator(seed=9)
        det = make_edge_detector()
        rng = np.random.default_rng(2)
        image = rng.uniform(-1, 1, (64, 64, 3)).astype(np.float32)
        one = outpaint_steps(gen, image, [np.zeros((64, 64), np.float32)], det)
        assert one.shape == (64, 128, 3)
        sketches = [np.zeros((64, 64), np.float32) for _ in range(2)]
        two = outpaint_steps(gen, image, sketches, det)
        assert two.shape == (64, 192, 3)
        assert np.array_equal(two[:, :64], image)  # input block untouched

    def test_chained_windows_consistent(self):
        gen = small_generator(seed=10)
        det = make_edge_detector()
        rng = np.random.default_rng(3)
        image = rng.uniform(-1, 1, (64, 64, 3)).astype(np.float32)
        sk = (rng.uniform(0, 1, (64, 64)) > 0.9).astype(np.float32)
        two = outpaint_steps(gen, image, [sk, sk], det)
        # second step must equal outpainting the first step's new half
        first = outpaint_steps(gen, image, [sk], det)
        again = outpaint_steps(gen, first[:, 64:], [sk], det)
        assert np.array_equal(two[:, 64:], again)

    def test_errors(self):
        gen = small_generator(seed=11)
        det = make_edge_detector()
        with pytest.raises(ValueError):
            outpaint_steps(gen, np.zeros((64, 64, 3), np.float32), [], det)
        with pytest.raises(ValueError):
            outpaint_steps(gen, np.zeros((32, 32, 3), np.float32),
                           [np.zeros((32, 32), np.float32)], det)
