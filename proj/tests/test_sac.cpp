#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "mixflow/error.hpp"
#include "mixflow/replay.hpp"
#include "mixflow/sac.hpp"
#include "sac_reference.hpp"

using namespace mixflow;
using namespace mixflow::testing;

TEST_CASE("log density matches the textbook change of variables") {
    for (double mean : {-2.0, 0.0, 0.7}) {
        for (double ls : {-3.0, 0.0, 1.5}) {
            for (double eps : {-1.3, 0.0, 0.4}) {
                CHECK(squash(mean, ls, eps).log_prob == doctest::Approx(reference_log_prob(mean, ls, eps)).epsilon(1e-9));
            }
        }
    }
    // Far in the tail the stable form stays finite where the naive one does not.
    CHECK(std::isfinite(squash(30.0, 0.0, 0.0).log_prob));
}

TEST_CASE("analytic gradients match central finite differences") {
    RngStream rng(17, "grad");
    PolicyParams p = PolicyParams::create(60, 256, 4, std::log(0.3));
    // Targets differ from the online critics.
    p.q1_target.init_uniform(rng);
    p.q2_target.init_uniform(rng);
    const Batch b = random_batch(16, 60, rng);
    const Vector eps = Vector::NullaryExpr(16, [&] { return 2.0 * rng.uniform() - 1.0; });
    const double alpha = std::exp(p.log_alpha);
    const double h = 1e-6;
    int probes = 0;

    SUBCASE("critics") {
        Mlp g1 = p.q1;
        Mlp g2 = p.q2;
        g1.set_zero();
        g2.set_zero();
        const CriticLosses cl = critic_losses(p, b, eps, 0.99, &g1, &g2);
        CHECK(cl.loss1 == doctest::Approx(reference_critic_loss(p, b, eps, 0.99, 1)).epsilon(1e-10));
        CHECK(cl.loss2 == doctest::Approx(reference_critic_loss(p, b, eps, 0.99, 2)).epsilon(1e-10));
        for (int which : {1, 2}) {
            Mlp& net = which == 1 ? p.q1 : p.q2;
            const Mlp& g = which == 1 ? g1 : g2;
            for (int k = 0; k < 60; ++k) {
                const auto i = static_cast<std::size_t>(rng() % net.parameter_count());
                const double saved = net.parameter(i);
                net.parameter(i) = saved + h;
                const double up = reference_critic_loss(p, b, eps, 0.99, which);
                net.parameter(i) = saved - h;
                const double down = reference_critic_loss(p, b, eps, 0.99, which);
                net.parameter(i) = saved;
                const double fd = (up - down) / (2.0 * h);
                CHECK_MESSAGE(relative_error(g.parameter(i), fd) <= 1e-4,
                              "critic ", which, " param ", i, ": ", g.parameter(i), " vs ", fd);
                ++probes;
            }
        }
        CHECK(probes >= 100);
    }
    SUBCASE("actor") {
        Mlp ga = p.actor;
        ga.set_zero();
        const ActorLoss al = actor_loss(p, b.obs, eps, alpha, &ga);
        CHECK(al.loss == doctest::Approx(reference_actor_loss(p, b.obs, eps, alpha)).epsilon(1e-10));
        for (int k = 0; k < 120; ++k) {
            const auto i = static_cast<std::size_t>(rng() % p.actor.parameter_count());
            const double saved = p.actor.parameter(i);
            p.actor.parameter(i) = saved + h;
            const double up = reference_actor_loss(p, b.obs, eps, alpha);
            p.actor.parameter(i) = saved - h;
            const double down = reference_actor_loss(p, b.obs, eps, alpha);
            p.actor.parameter(i) = saved;
            const double fd = (up - down) / (2.0 * h);
            CHECK_MESSAGE(relative_error(ga.parameter(i), fd) <= 1e-4, "actor param ", i, ": ", ga.parameter(i),
                          " vs ", fd);
            ++probes;
        }
        CHECK(probes >= 100);
    }
    SUBCASE("temperature") {
        const ActorLoss al = actor_loss(p, b.obs, eps, alpha);
        auto loss = [&](double la) { return -(la * (al.log_prob.array() - 1.0)).mean(); };
        const double fd = (loss(p.log_alpha + h) - loss(p.log_alpha - h)) / (2.0 * h);
        CHECK(relative_error(temperature_gradient(al.log_prob, -1.0), fd) <= 1e-6);
    }
}

TEST_CASE("terminal transitions do not bootstrap") {
    RngStream rng(2, "t");
    const PolicyParams p = PolicyParams::create(60, 32, 1);
    Batch b = random_batch(8, 60, rng);
    b.obs.colwise() = b.obs.col(0);
    b.next_obs.colwise() = b.next_obs.col(0);
    b.action.setConstant(1.0);
    b.reward.setZero();
    b.done.setOnes();
    const CriticLosses cl = critic_losses(p, b, Vector::Zero(8), 0.99);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK(cl.target(i) == 0.0);
}

TEST_CASE("Polyak averaging with tau 0.005") {
    Mlp target({3, 4, 1});
    Mlp online({3, 4, 1});
    for (std::size_t i = 0; i < online.parameter_count(); ++i) online.parameter(i) = 1.0;
    target.polyak(online, 5e-3);
    for (std::size_t i = 0; i < target.parameter_count(); ++i) CHECK(target.parameter(i) == 0.005);
}

TEST_CASE("action sampling") {
    PolicyParams zero = PolicyParams::create(60, 16, 1);
    zero.actor.set_zero();
    const Observation obs(60, 0.5);

    SUBCASE("zero network acts deterministically at zero") { CHECK(deterministic_action(zero, obs) == 0.0); }
    SUBCASE("fixed seed reproduces samples") {
        RngStream a(9, "policy");
        RngStream b(9, "policy");
        for (int i = 0; i < 20; ++i) {
            const ActionSample x = sample_action(zero, obs, a);
            const ActionSample y = sample_action(zero, obs, b);
            CHECK(x.action == y.action);
            CHECK(x.log_prob == y.log_prob);
        }
    }
    SUBCASE("samples at mean zero are symmetric") {
        RngStream rng(3, "policy");
        const int n = 100000;
        const Matrix x = Matrix::Constant(60, n, 0.5);
        const auto s = sample_actions(zero, x, rng);
        int positive = 0;
        double sum = 0.0;
        double sq = 0.0;
        for (const auto& a : s) {
            positive += a.action > 0.0;
            sum += a.action;
            sq += a.action * a.action;
        }
        const double mean = sum / n;
        const double sd = std::sqrt(sq / n - mean * mean);
        CHECK(std::abs(positive - n / 2) <= 3.0 * std::sqrt(n * 0.25));
        CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(static_cast<double>(n)));
    }
    SUBCASE("vanishing std collapses onto the squashed mean") {
        PolicyParams p = zero;
        p.actor.layers().back().b(0) = 0.3;
        p.actor.layers().back().b(1) = -50.0;  // clamped to -20
        RngStream rng(1, "policy");
        const ActionSample s = sample_action(p, obs, rng);
        CHECK(s.action == doctest::Approx(kActionMax * std::tanh(0.3)).epsilon(1e-7));  // std = e^-20
        CHECK(std::isfinite(s.log_prob));
    }
    SUBCASE("actions stay within the bound for extreme parameters") {
        RngStream rng(5, "policy");
        PolicyParams p = PolicyParams::create(60, 16, 8);
        for (std::size_t i = 0; i < p.actor.parameter_count(); ++i) p.actor.parameter(i) *= 100.0;
        for (int k = 0; k < 1000; ++k) {
            Observation o(60);
            for (double& v : o) v = 2.0 * rng.uniform() - 1.0;
            const ActionSample s = sample_action(p, o, rng);
            REQUIRE(std::abs(s.action) <= kActionMax);
            REQUIRE(std::abs(deterministic_action(p, o)) <= kActionMax);
        }
    }
    SUBCASE("wrong observation size is rejected") {
        CHECK_THROWS_AS(deterministic_action(zero, Observation(59, 0.0)), ValidationError);
    }
}

TEST_CASE("identical seeds give identical initial parameters") {
    CHECK(PolicyParams::create(60, 32, 7) == PolicyParams::create(60, 32, 7));
    CHECK(!(PolicyParams::create(60, 32, 7) == PolicyParams::create(60, 32, 8)));
    const PolicyParams p = PolicyParams::create(60, 256, 7);
    const double bound = 1.0 / std::sqrt(60.0);
    for (Eigen::Index i = 0; i < p.actor.layers()[0].w.size(); ++i) REQUIRE(std::abs(p.actor.layers()[0].w.data()[i]) <= bound);
    CHECK(p.q1_target == p.q1);
}

TEST_CASE("prioritized replay") {
    PrioritizedReplay buf(100, 4, 0.5);
    RngStream rng(1, "replay");
    auto make = [&](double r) {
        Transition t;
        t.obs = {r, 0, 0, 0};
        t.next_obs = {0, r, 0, 0};
        t.action = 1.0;
        t.reward = r;
        return t;
    };
    for (int i = 0; i < 250; ++i) buf.add(make(i));
    CHECK(buf.size() == 100);

    SUBCASE("probabilities are positive and normalized") {
        std::vector<std::size_t> idx(100);
        std::iota(idx.begin(), idx.end(), 0);
        Vector td = Vector::NullaryExpr(100, [&] { return 5.0 * rng.uniform(); });
        td(3) = 0.0;
        buf.update_priorities(idx, td);
        double total = 0.0;
        for (std::size_t i = 0; i < 100; ++i) {
            CHECK(buf.priority(i) > 0.0);
            total += buf.probability(i);
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
        CHECK(buf.priority(3) == doctest::Approx(std::pow(1e-6, 0.5)));
        CHECK(buf.priority(5) == doctest::Approx(std::pow(std::abs(td(5)) + 1e-6, 0.5)));
    }
    SUBCASE("new transitions enter with the maximum priority") {
        buf.update_priorities({0, 1}, (Vector(2) << 99.0, 0.5).finished());
        buf.add(make(-1));
        const std::size_t newest = 250 % 100;
        CHECK(buf.priority(newest) == doctest::Approx(std::pow(99.0 + 1e-6, 0.5)));
    }
    SUBCASE("sampling frequency follows priority and weights are at most one") {
        std::vector<std::size_t> idx(100);
        std::iota(idx.begin(), idx.end(), 0);
        Vector td = Vector::Constant(100, 1.0);
        td(7) = 99.0;  // priority 10x the rest
        buf.update_priorities(idx, td);
        std::vector<int> hits(100, 0);
        const int draws = 2000;
        for (int k = 0; k < draws; ++k) {
            const Batch b = buf.sample(32, 0.4, rng);
            for (Eigen::Index j = 0; j < b.size(); ++j) {
                REQUIRE(b.weight(j) <= 1.0 + 1e-12);
                REQUIRE(b.weight(j) > 0.0);
                REQUIRE(b.reward(j) == b.obs(0, j));
                ++hits[b.indices[static_cast<std::size_t>(j)]];
            }
        }
        const double expected = 32.0 * draws * buf.probability(7);
        CHECK(std::abs(hits[7] - expected) <= 4.0 * std::sqrt(expected));
    }
    SUBCASE("beta anneals linearly to one") {
        CHECK(annealed_beta(0.4, 0, 100) == 0.4);
        CHECK(annealed_beta(0.4, 50, 100) == doctest::Approx(0.7));
        CHECK(annealed_beta(0.4, 500, 100) == 1.0);
    }
}

TEST_CASE("learner updates keep parameters finite and fit a fixed batch") {
    RngStream rng(4, "fit");
    SacHyper hyper;
    hyper.hidden = 64;
    hyper.batch_size = 32;
    SacLearner learner(60, hyper, 3);
    const Batch b = random_batch(32, 60, rng);
    const double before = critic_losses(learner.params(), b, Vector::Zero(32), hyper.gamma).loss1;
    for (int i = 0; i < 200; ++i) {
        const UpdateStats s = learner.update(b);
        REQUIRE(learner.params().all_finite());
        REQUIRE(s.td_errors.size() == 32);
    }
    const double after = critic_losses(learner.params(), b, Vector::Zero(32), hyper.gamma).loss1;
    CHECK(after < before);
    CHECK(learner.updates() == 200);
}

TEST_CASE("checkpoint round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "mixflow_test_ckpt";
    std::filesystem::create_directories(dir);
    PolicyParams p = PolicyParams::create(60, 32, 11, -1.25);
    // Values exactly representable in f32 survive unchanged.
    for (Mlp* m : {&p.actor, &p.q1, &p.q2, &p.q1_target, &p.q2_target})
        for (std::size_t i = 0; i < m->parameter_count(); ++i) m->parameter(i) = static_cast<float>(m->parameter(i));
    save_checkpoint(dir / "a.mxfw", p);
    CHECK(load_checkpoint(dir / "a.mxfw") == p);

    {
        std::ofstream out(dir / "bad.mxfw", std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.mxfw"), ParseError);
    {
        std::ofstream out(dir / "v9.mxfw", std::ios::binary);
        out.write("MXFW", 4);
        const std::uint16_t v = 9;
        out.write(reinterpret_cast<const char*>(&v), 2);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "v9.mxfw"), VersionError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.mxfw"), IoError);
    std::filesystem::remove_all(dir);
}
