import numpy as np
import pytest

from genprior import rng
from genprior.forward_model import LinearModel, build_blur, observe
from genprior.generator import Dense, GeneratorNet, g_mean, gamma, jacobian
from genprior.laplace_inference import (
    expansion_update,
    laplace_asymptotic_cov,
    laplace_estimate,
    laplace_posterior,
    laplace_prior,
    least_squares_init,
    log_joint_integrand,
    marginal_pixel_std,
    select_expansion_point,
    update_residual,
)
from genprior.linalg import chol_factor
from genprior.optimize import maximize
from genprior.synthetic import (
    affine_net,
    constant_cov_head,
    remark_instance,
    tanh_net,
)


def identity_gamma_net(p, d, seed=0):
    gen = np.random.default_rng(seed)
    return GeneratorNet(
        latent_dim=p, output_dim=d,
        mean_layers=(Dense(W=gen.standard_normal((d, p)),
                           b=gen.standard_normal(d)),),
        cov_head=constant_cov_head("isotropic", p, d, 1.0))


class TestLeastSquaresInit:
    def test_equal_weight_average(self):
        net = identity_gamma_net(2, 3)
        b = net.mean_layers[0].b
        model = LinearModel(np.eye(3), 1.0)
        y = np.array([0.2, -0.4, 1.0])
        assert np.allclose(least_squares_init(model, y, net), (y + b) / 2,
                           atol=1e-12)

    def test_likelihood_dominates_at_tiny_noise(self):
        net = identity_gamma_net(2, 3, seed=1)
        model = LinearModel(np.eye(3), 1e-12)
        y = np.array([0.5, 0.1, -0.9])
        x0 = least_squares_init(model, y, net)
        assert np.linalg.norm(x0 - y) / np.linalg.norm(y) < 1e-4

    def test_first_order_optimality(self):
        net = tanh_net(5, p=2, d=4, hidden=3, gamma_value=0.05)
        model = LinearModel(np.random.default_rng(2).standard_normal((5, 4)), 0.01)
        y = np.random.default_rng(3).standard_normal(5)
        x0 = least_squares_init(model, y, net)
        g0 = g_mean(net, np.zeros(2))
        Gi = np.linalg.inv(gamma(net, np.zeros(2)))
        grad = 2 * model.A.T @ (model.A @ x0 - y) / model.sigma2 + 2 * Gi @ (x0 - g0)
        scale = np.linalg.norm(model.A.T @ y) / model.sigma2 + 1.0
        assert np.max(np.abs(grad)) < 1e-8 * scale


class TestExpansionPoint:
    def test_affine_converges_in_one_accepted_step(self):
        for k in range(5):
            net = affine_net(100 + k, p=2, d=5, gamma_value=0.05)
            gen = np.random.default_rng(k)
            model = LinearModel(gen.standard_normal((6, 5)), 0.01)
            y = observe(model, gen.standard_normal(5), seed=k)
            z0, trace = select_expansion_point(model, y, net)
            x0 = least_squares_init(model, y, net)
            assert len(trace) == 2  # init value + one accepted update
            assert update_residual(net, x0, z0) < 1e-10

    def test_constant_generator_update_is_zero(self):
        net = GeneratorNet(latent_dim=2, output_dim=3,
                           mean_layers=(Dense(W=np.zeros((3, 2)),
                                              b=np.ones(3)),),
                           cov_head=constant_cov_head("isotropic", 2, 3, 0.1))
        z_new = expansion_update(net, np.array([2.0, 0.5, -1.0]), np.ones(2))
        assert np.allclose(z_new, 0.0, atol=1e-14)

    def test_trace_strictly_increasing(self):
        gen = np.random.default_rng(7)
        for k in range(10):
            net = tanh_net(200 + k, p=2, d=6, hidden=4, gamma_value=0.05)
            model = LinearModel(gen.standard_normal((6, 6)), 0.04)
            y = observe(model, gen.standard_normal(6), seed=k)
            _, trace = select_expansion_point(model, y, net)
            assert all(b > a for a, b in zip(trace, trace[1:]))

    def test_worst_case_returns_initial_point(self):
        # constant generator: no update can improve the integrand
        net = GeneratorNet(latent_dim=2, output_dim=3,
                           mean_layers=(Dense(W=np.zeros((3, 2)),
                                              b=np.ones(3)),),
                           cov_head=constant_cov_head("isotropic", 2, 3, 0.1))
        model = LinearModel(np.eye(3), 0.5)
        z0, trace = select_expansion_point(model, y=np.ones(3), net=net)
        assert len(trace) >= 1


class TestLatentSearchFallback:
    def test_full_covariance_head_uses_fd_gradient(self):
        # full heads have no analytic search gradient; the central-difference
        # fallback must still find the integrand maximizer
        from genprior.generator import CovHead
        from genprior.laplace_inference import initial_latent_point, latent_search

        p, d = 2, 3
        gen = np.random.default_rng(0)
        head = CovHead(variant="full", eps_gamma=1e-3,
                       layers=(Dense(W=np.zeros((d * (d + 1) // 2, p)),
                                     b=0.3 * gen.standard_normal(d * (d + 1) // 2)),))
        net = GeneratorNet(latent_dim=p, output_dim=d,
                           mean_layers=(Dense(W=gen.standard_normal((d, p)),
                                              b=gen.standard_normal(d)),),
                           cov_head=head)
        model = LinearModel(np.eye(d), 0.04)
        y = observe(model, g_mean(net, np.array([0.5, -0.5])), seed=1)
        x0, z0 = initial_latent_point(model, y, net)
        base = log_joint_integrand(net, x0, z0)
        for delta in 0.01 * np.random.default_rng(2).standard_normal((10, p)):
            assert log_joint_integrand(net, x0, z0 + delta) <= base + 1e-9

    def test_restarts_never_worse(self):
        net = tanh_net(99, p=2, d=5, hidden=4, gamma_value=0.05)
        model = LinearModel(np.eye(5), 0.09)
        y = observe(model, g_mean(net, np.array([1.0, -1.0])), seed=2)
        from genprior.laplace_inference import initial_latent_point

        x0, z_plain = initial_latent_point(model, y, net, restarts=0)
        _, z_restart = initial_latent_point(model, y, net, restarts=3)
        assert (log_joint_integrand(net, x0, z_restart)
                >= log_joint_integrand(net, x0, z_plain) - 1e-12)


class TestLaplacePrior:
    def test_origin_expansion(self):
        net = tanh_net(9, p=2, d=4, hidden=3, gamma_value=0.03)
        prior = laplace_prior(net, np.zeros(2))
        J = jacobian(net, np.zeros(2))
        assert np.allclose(prior.mean, g_mean(net, np.zeros(2)))
        assert np.allclose(prior.cov, gamma(net, np.zeros(2)) + J @ J.T)

    def test_affine_prior_is_exact_marginal_any_z0(self):
        net = affine_net(11, p=2, d=4, gamma_value=0.05)
        W, b = net.mean_layers[0].W, net.mean_layers[0].b
        target_cov = gamma(net, np.zeros(2)) + W @ W.T
        for z0 in np.random.default_rng(1).standard_normal((5, 2)):
            prior = laplace_prior(net, z0)
            assert np.allclose(prior.mean, b, atol=1e-12)
            assert np.allclose(prior.cov, target_cov, atol=1e-12)

    def test_constant_generator(self):
        net = GeneratorNet(latent_dim=2, output_dim=3,
                           mean_layers=(Dense(W=np.zeros((3, 2)),
                                              b=np.array([1.0, 2.0, 3.0])),),
                           cov_head=constant_cov_head("isotropic", 2, 3, 0.2))
        prior = laplace_prior(net, np.array([0.4, -0.4]))
        assert np.allclose(prior.mean, [1.0, 2.0, 3.0])
        assert np.allclose(prior.cov, 0.2 * np.eye(3), atol=1e-12)


class TestLaplacePosterior:
    def test_conjugate_average(self):
        net = identity_gamma_net(2, 3, seed=4)
        from genprior.laplace_inference import LaplacePrior

        m = np.array([1.0, 0.0, -1.0])
        prior = LaplacePrior(mean=m, cov=np.eye(3), z0=np.zeros(2))
        model = LinearModel(np.eye(3), 1.0)
        y = np.array([0.0, 2.0, 0.0])
        post = laplace_posterior(model, y, prior)
        assert np.allclose(post.xhat, (y + m) / 2, atol=1e-12)
        assert np.allclose(post.Shat, np.eye(3) / 2, atol=1e-12)

    def test_maximum_likelihood_limit(self):
        net = tanh_net(21, p=2, d=4, hidden=3, gamma_value=0.05)
        model = LinearModel(np.eye(4), 1e-12)
        y = np.array([0.5, 0.2, -0.1, 0.8])
        post = laplace_posterior(model, y, laplace_prior(net, np.zeros(2)))
        assert np.linalg.norm(post.xhat - y) / np.linalg.norm(y) < 1e-4
        assert np.max(np.abs(post.Shat - 1e-12 * np.eye(4))) < 0.01 * 1e-12

    def test_mean_maximizes_log_posterior(self):
        net = tanh_net(22, p=2, d=4, hidden=3, gamma_value=0.05)
        gen = np.random.default_rng(5)
        model = LinearModel(gen.standard_normal((5, 4)), 0.09)
        y = gen.standard_normal(5)
        prior = laplace_prior(net, np.array([0.3, -0.3]))
        post = laplace_posterior(model, y, prior)
        Ci = np.linalg.inv(prior.cov)

        def f(x):
            r = model.A @ x - y
            val = -r @ r / (2 * model.sigma2) \
                - 0.5 * (x - prior.mean) @ Ci @ (x - prior.mean)
            grad = -model.A.T @ r / model.sigma2 - Ci @ (x - prior.mean)
            return val, grad

        res = maximize(f, np.zeros(4))
        assert np.linalg.norm(res.x - post.xhat) < 1e-6

    def test_loewner_order_vs_prior(self):
        gen = np.random.default_rng(6)
        for k in range(5):
            net = tanh_net(300 + k, p=2, d=5, hidden=4, gamma_value=0.05)
            model = LinearModel(gen.standard_normal((6, 5)), 10 ** gen.uniform(-4, 0))
            y = gen.standard_normal(6)
            prior = laplace_prior(net, gen.standard_normal(2))
            post = laplace_posterior(model, y, prior)
            assert np.linalg.eigvalsh(prior.cov - post.Shat).min() >= -1e-10
            assert (np.linalg.eigvalsh(post.Shat).max()
                    <= np.linalg.eigvalsh(prior.cov).max() + 1e-10)


class TestMarginalPixelStd:
    def test_half_identity(self):
        from genprior.laplace_inference import LaplacePosterior, LaplacePrior

        post = LaplacePosterior(
            xhat=np.zeros(3), Shat=np.eye(3) / 2,
            prior=LaplacePrior(mean=np.zeros(3), cov=np.eye(3), z0=np.zeros(1)),
            model=LinearModel(np.eye(3), 1.0))
        assert np.allclose(marginal_pixel_std(post), 1 / np.sqrt(2))

    def test_positive_and_matches_sampling(self):
        net = tanh_net(31, p=2, d=4, hidden=3, gamma_value=0.05)
        gen = np.random.default_rng(8)
        model = LinearModel(gen.standard_normal((5, 4)), 0.04)
        y = gen.standard_normal(5)
        post = laplace_posterior(model, y, laplace_prior(net, np.zeros(2)))
        std = marginal_pixel_std(post)
        assert np.all(std > 0)
        L = chol_factor(post.Shat)
        draws = post.xhat + gen.standard_normal((100_000, 4)) @ L.T
        emp = draws.std(axis=0)
        assert np.max(np.abs(emp - std) / std) < 0.03


class TestAsymptoticCov:
    def test_identity(self):
        model = LinearModel(np.eye(4), 0.09)
        assert np.allclose(laplace_asymptotic_cov(model), 0.09 * np.eye(4))

    def test_full_rank(self):
        model = LinearModel(np.random.default_rng(9).standard_normal((6, 5)), 0.01)
        C = laplace_asymptotic_cov(model)
        sv = np.linalg.svd(C, compute_uv=False)
        assert np.sum(sv > 1e-12 * sv[0]) == 5

    def test_difference_to_latent_cov_is_psd(self):
        # The difference of the two asymptotic covariances is positive
        # semidefinite: it equals sigma^2 M^{-1/2} (I - P) M^{-1/2} for the
        # orthogonal projection P onto M^{1/2} range(J), M = A^T A.
        from genprior.latent_inference import latent_asymptotic_cov

        net, A, sigma2, z_star = remark_instance()
        model = LinearModel(A, sigma2)
        diff = laplace_asymptotic_cov(model) - latent_asymptotic_cov(
            net, A, sigma2, z_star)
        assert np.linalg.eigvalsh(diff).min() >= -1e-10


class TestConsistency784:
    def test_blur_instance_converges(self):
        net = tanh_net(550, p=8, d=784, hidden=16, out_scale=0.5,
                       gamma_value=0.02, cov_variant="diagonal")
        blur = build_blur(3.0, 28, 28, 4)
        gen = np.random.default_rng(2)
        x = np.clip(g_mean(net, gen.standard_normal(8) * 0.5)
                    + 0.015 * gen.standard_normal(784), 0, 1)
        errs = []
        for s in range(1, 7):
            model = LinearModel(blur.matrix, 10.0 ** (-2 * s))
            y = observe(model, x, seed=rng.derive_seed(5, s))
            xh = laplace_estimate(model, y, net).xhat
            errs.append(np.linalg.norm(xh - x))
        assert all(a > b for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-3
