#include <doctest.h>

#include <cmath>

#include "idcr/flow.hpp"
#include "idcr/rng.hpp"

using namespace idcr;

TEST_CASE("interpolation endpoints and midpoint") {
    Tensor z0 = Tensor::from({2}, {1, 0});
    Tensor eps = Tensor::from({2}, {0, 1});
    CHECK(interpolate(z0, eps, 0.0).data == z0.data);
    CHECK(interpolate(z0, eps, 1.0).data == eps.data);
    Tensor mid = interpolate(z0, eps, 0.5);
    CHECK(mid[0] == 0.5);
    CHECK(mid[1] == 0.5);
}

TEST_CASE("velocity target") {
    Tensor z0 = Tensor::from({2}, {1, 0});
    Tensor eps = Tensor::from({2}, {0, 1});
    Tensor v = velocity_target(z0, eps);
    CHECK(v[0] == -1.0);
    CHECK(v[1] == 1.0);
    Tensor zero = velocity_target(z0, z0);
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);
}

TEST_CASE("rectified-flow loss") {
    Tensor z0 = Tensor::from({2}, {1, 0});
    Tensor eps = Tensor::from({2}, {0, 1});
    auto one = [](double) { return 1.0; };
    CHECK(rf_loss(velocity_target(z0, eps), z0, eps, 0.3, one) == 0.0);
    // residual all ones: pred = target + 1
    Tensor pred = velocity_target(z0, eps);
    for (auto& x : pred.data) x += 1.0;
    CHECK(rf_loss(pred, z0, eps, 0.3, one) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rf_loss(pred, z0, eps, 0.3, [](double) { return 0.0; }) == 0.0);
    // weight is a function of t only
    CHECK(rf_loss(pred, z0, eps, 0.2, one) == rf_loss(pred, z0, eps, 0.8, one));
}

TEST_CASE("noise scale sigma") {
    CHECK(sigma(0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sigma(0.8, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sigma(0.3, 0.0) == 0.0);
    CHECK_THROWS_AS(sigma(0.0, 1.0), domain_error);
    CHECK_THROWS_AS(sigma(1.0, 1.0), domain_error);
}

TEST_CASE("euler step") {
    Tensor x = Tensor::from({1}, {1.0});
    Tensor v0 = Tensor::from({1}, {0.0});
    CHECK(ode_euler_step(x, v0, 0.1).data == x.data);
    Tensor v = Tensor::from({1}, {-1.0});
    CHECK(ode_euler_step(x, v, 0.1)[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("stochastic step hand case") {
    Tensor x = Tensor::from({1}, {1.0});
    Tensor v = Tensor::from({1}, {-1.0});
    Tensor noise = Tensor::from({1}, {0.0});
    // sigma_t = 1 at t=0.5; drift = -1 + (1/(2*0.5))*(1 + 0.5*(-1)) = -0.5
    SdeStepResult r = sde_step(x, v, 0.5, 0.1, 1.0, noise);
    CHECK(r.mean[0] == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(r.std == doctest::Approx(std::sqrt(0.1)).epsilon(1e-12));
    CHECK(r.x_next[0] == r.mean[0]); // zero noise lands on the mean

    SdeStepResult deg = sde_step(x, v, 0.5, -0.1, 0.0, noise);
    CHECK(deg.x_next[0] == ode_euler_step(x, v, -0.1)[0]);
    CHECK(deg.std == 0.0);
}

TEST_CASE("transition density") {
    Tensor mean = Tensor::from({3}, {0.1, -0.2, 0.3});
    double lp_mode = transition_log_prob(mean, mean, 0.5);
    double expect = -(3.0 / 2.0) * std::log(2.0 * M_PI * 0.25);
    CHECK(lp_mode == doctest::Approx(expect).epsilon(1e-12));

    Tensor x = Tensor::from({3}, {0.3, 0.1, -0.4});
    double ratio = std::exp(transition_log_prob(x, mean, 0.5) -
                            transition_log_prob(x, mean, 0.5));
    CHECK(ratio == 1.0);
    CHECK_THROWS_AS(transition_log_prob(x, mean, 0.0), domain_error);
}

TEST_CASE("1-D density integrates to one") {
    Tensor mean = Tensor::from({1}, {0.3});
    const double std_ = 0.7;
    // trapezoid over +-8 std
    const int n = 40000;
    double lo = 0.3 - 8 * std_, hi = 0.3 + 8 * std_, h = (hi - lo) / n, acc = 0;
    for (int i = 0; i <= n; ++i) {
        double x = lo + h * i;
        double p = std::exp(transition_log_prob(Tensor::from({1}, {x}), mean, std_));
        acc += (i == 0 || i == n) ? 0.5 * p : p;
    }
    CHECK(acc * h == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("classifier-free guidance combination") {
    Tensor vc = Tensor::from({1}, {1.0});
    Tensor vu = Tensor::from({1}, {0.0});
    CHECK(cfg_velocity(vc, vu, 1.0).data == vc.data);
    CHECK(cfg_velocity(vc, vu, 0.0).data == vu.data);
    CHECK(cfg_velocity(vc, vu, 2.5)[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("noise schedule grid") {
    NoiseSchedule ns = NoiseSchedule::make(1.0, 10);
    REQUIRE(ns.t_grid.size() == 11);
    double delta = 1.0 / 20.0;
    CHECK(ns.t_grid.front() == doctest::Approx(1.0 - delta).epsilon(1e-15));
    CHECK(ns.t_grid.back() == doctest::Approx(delta).epsilon(1e-15));
    for (size_t i = 1; i < ns.t_grid.size(); ++i) CHECK(ns.t_grid[i] < ns.t_grid[i - 1]);
}

TEST_CASE("sampler determinism and degeneracies") {
    auto vf = [](const Tensor& x, double t) {
        (void)t;
        Tensor v = x;
        for (auto& e : v.data) e = -0.5 * e;
        return v;
    };
    auto vzero = [](const Tensor& x, double) { return Tensor(x.shape); };
    auto ident = [](const Tensor& x) { return x; };
    std::vector<int> shape = {2, 3};

    SamplerConfig ode;
    ode.num_steps = 50;
    ode.mode = SampleMode::ODE;
    ode.cfg_scale = 1.0;
    ode.seed = 9;

    Trajectory a = sample(vf, vf, shape, ode, ident, 0);
    Trajectory b = sample(vf, vf, shape, ode, ident, 0);
    CHECK(a.video.data == b.video.data);

    // zero velocity leaves the initial noise untouched
    Trajectory z = sample(vzero, vzero, shape, ode, ident, 0);
    CHECK(z.video.data == z.states.front().data);

    SamplerConfig sde = ode;
    sde.mode = SampleMode::SDE;
    sde.noise_a = 0.0;
    Trajectory c = sample(vf, vf, shape, sde, ident, 0);
    double worst = 0;
    for (size_t i = 0; i < c.video.data.size(); ++i)
        worst = std::max(worst, std::abs(c.video.data[i] - a.video.data[i]));
    CHECK(worst < 1e-9);

    sde.noise_a = 1.0;
    Trajectory d = sample(vf, vf, shape, sde, ident, 0);
    REQUIRE(d.log_probs.size() == 50);
    for (double lp : d.log_probs) CHECK(std::isfinite(lp));
    CHECK(d.step_means.size() == 50);
    CHECK(d.states.size() == 51);
}
