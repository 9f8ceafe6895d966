import numpy as np
import pytest
import torch

from outsketch.blocks import init_parameters
from outsketch.critics import Critic, make_critic_pair
from conftest import finite_difference_check, rand_image


class TestCriticForward:
    def test_scalar_per_sample(self):
        critic = Critic((64, 64), in_channels=4, channel_div=4)
        init_parameters(critic, 1)
        img = torch.randn(3, 3, 64, 64)
        sk = torch.zeros(3, 1, 64, 64)
        out = critic(img, sk)
        assert out.shape == (3,)
        assert torch.isfinite(out).all()

    def test_full_scale_input(self):
        critic = Critic((128, 256), in_channels=4)
        init_parameters(critic, 2)
        out = critic(torch.zeros(1, 3, 128, 256), torch.zeros(1, 1, 128, 256))
        assert out.shape == (1,)

    def test_zero_parameters_give_zero(self):
        critic = Critic((64, 64), in_channels=4, channel_div=4)
        with torch.no_grad():
            for p in critic.parameters():
                p.zero_()
        out = critic(torch.randn(2, 3, 64, 64), torch.rand(2, 1, 64, 64))
        assert torch.equal(out, torch.zeros(2))

    def test_concat_conditioning(self):
        critic = Critic((64, 64), in_channels=4, channel_div=4)
        init_parameters(critic, 3)
        img = torch.randn(2, 3, 64, 64)
        sk = (torch.rand(2, 1, 64, 64) > 0.5).float()
        assert torch.equal(critic(img, sk), critic(torch.cat([img, sk], dim=1)))

    def test_shape_validation(self):
        critic = Critic((64, 64), in_channels=4, channel_div=4)
        with pytest.raises(ValueError):
            critic(torch.zeros(1, 3, 64, 64))  # missing sketch channel
        with pytest.raises(ValueError):
            critic(torch.zeros(1, 3, 32, 32), torch.zeros(1, 1, 32, 32))
        with pytest.raises(ValueError):
            Critic((48, 48))

    def test_deterministic(self):
        critic = Critic((64, 64), in_channels=4, channel_div=4)
        init_parameters(critic, 4)
        x = torch.randn(1, 4, 64, 64)
        assert torch.equal(critic(x), critic(x))


class TestCriticProperties:
    def test_unbounded_head(self):
        critic = Critic((64, 64), in_channels=4, channel_div=4)
        init_parameters(critic, 5)
        with torch.no_grad():
            for name, p in critic.named_parameters():
                if "weight" in name:
                    p.mul_(10.0)
        assert isinstance(critic.head, torch.nn.Linear)
        x = torch.randn(1, 4, 64, 64)
        small = critic(x).abs().item()
        large = critic(200.0 * x).abs().item()
        assert large > 10.0 * max(small, 1.0)

    def test_gradient_at_interpolates(self):
        rng = np.random.default_rng(40)
        critic = Critic((32, 32), in_channels=4, channel_div=8).double()
        init_parameters(critic, 6)
        real = rand_image(rng, (2, 4, 32, 32))
        fake = rand_image(rng, (2, 4, 32, 32))
        eps = torch.as_tensor(rng.uniform(0, 1, (2, 1, 1, 1)))
        interp = (eps * real + (1 - eps) * fake).requires_grad_(True)
        err = finite_difference_check(lambda x: critic(x).sum(), [interp], rng,
                                      n_probes=6)
        assert err < 1e-3


class TestCriticPair:
    def test_scales(self):
        g, l = make_critic_pair("desk")
        assert g.input_hw == (64, 128)
        assert l.input_hw == (64, 64)
        g, l = make_critic_pair("full")
        assert g.input_hw == (128, 256)
        assert l.input_hw == (128, 128)

    def test_no_parameter_sharing(self):
        g, l = make_critic_pair("desk")
        g_ids = {id(p) for p in g.parameters()}
        assert all(id(p) not in g_ids for p in l.parameters())
