#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "sapr/attack.hpp"
#include "sapr/rng.hpp"

using namespace sapr;

namespace {

ViTConfig tiny_config() {
    ViTConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.channels = 3;
    cfg.embed_dim = 24;
    cfg.num_heads = 3;
    cfg.num_blocks = 2;
    cfg.mlp_ratio = 2;
    cfg.num_classes = 5;
    return cfg;
}

Tensor random_image(const ViTConfig& cfg, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> v(cfg.channels * cfg.image_size * cfg.image_size);
    for (double& x : v) x = std::nearbyint(rng.uniform(0.0, 255.0));
    return Tensor::from_vector({cfg.channels, cfg.image_size, cfg.image_size}, std::move(v));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.values()[i] != b.values()[i]) return false;
    return true;
}

AttackConfig tiny_attack(AttackMethod method, bool sapr, double p = 0.0) {
    AttackConfig cfg;
    cfg.method = method;
    cfg.iterations = 6;
    cfg.sim_scales = 3;
    cfg.sapr_enabled = sapr;
    cfg.restructure_threshold = p;
    cfg.seed = 4242;
    return cfg;
}

} // namespace

TEST_CASE("clip_to_budget projects into the intersection of box constraints") {
    Tensor x = Tensor::from_vector({1, 1, 3}, {100.0, 5.0, 250.0});
    Tensor same = clip_to_budget(x, x, 16.0);
    CHECK(bit_equal(same, x));

    Tensor moved = Tensor::from_vector({1, 1, 3}, {120.0, -8.0, 280.0});
    Tensor clipped = clip_to_budget(moved, x, 16.0);
    CHECK(clipped.at(0, 0, 0) == 116.0); // x+20 -> x+16
    CHECK(clipped.at(0, 0, 1) == 0.0);   // range floor wins
    CHECK(clipped.at(0, 0, 2) == 255.0); // range ceiling

    CHECK_THROWS_AS(clip_to_budget(Tensor::zeros({2}), Tensor::zeros({3}), 1.0), ShapeError);
}

TEST_CASE("mim_step hand values") {
    Tensor momentum = Tensor::from_vector({1, 1, 1}, {0.5});
    Tensor grad = Tensor::from_vector({1, 1, 1}, {2.0});
    Tensor x = Tensor::from_vector({1, 1, 1}, {100.0});
    MimStep out = mim_step(momentum, grad, 1.0, 2.0, x, x, 16.0);
    // ‖grad‖₁ = 2 ⇒ normalized 1; momentum 0.5+1 = 1.5; step +α·sign = +2.
    CHECK(out.momentum.values()[0] == 1.5);
    CHECK(out.x_adv.values()[0] == 102.0);
}

TEST_CASE("mim_step with zero decay reduces to the sign-gradient step") {
    Tensor momentum = Tensor::from_vector({1, 1, 2}, {5.0, -3.0});
    Tensor grad = Tensor::from_vector({1, 1, 2}, {0.4, -0.2});
    Tensor x = Tensor::from_vector({1, 1, 2}, {50.0, 60.0});
    MimStep out = mim_step(momentum, grad, 0.0, 1.0, x, x, 16.0);
    CHECK(out.x_adv.values()[0] == 51.0);
    CHECK(out.x_adv.values()[1] == 59.0);
}

TEST_CASE("mim_step skips normalization for an all-zero gradient") {
    Tensor momentum = Tensor::zeros({1, 1, 2});
    Tensor grad = Tensor::zeros({1, 1, 2});
    Tensor x = Tensor::from_vector({1, 1, 2}, {10.0, 20.0});
    MimStep out = mim_step(momentum, grad, 1.0, 2.0, x, x, 16.0);
    CHECK(bit_equal(out.x_adv, x));
    for (double m : out.momentum.values()) CHECK(m == 0.0);
}

TEST_CASE("dim_transform with probability zero is the identity") {
    ViTConfig cfg = tiny_config();
    Tensor x = random_image(cfg, 1);
    RngStream rng(9);
    Tensor out = dim_transform(x, 0.0, rng);
    CHECK(bit_equal(out, x));
}

TEST_CASE("dim_transform always preserves the canvas shape") {
    ViTConfig cfg = tiny_config();
    Tensor x = random_image(cfg, 2);
    RngStream rng(10);
    for (int i = 0; i < 50; ++i) {
        Tensor out = dim_transform(x, 1.0, rng);
        CHECK(out.shape() == x.shape());
    }
}

TEST_CASE("dim_transform draw sequence is frozen for a fixed stream") {
    // Replays the documented draw contract (apply?, r, off_y, off_x) on a
    // stream with the same seed and checks the transform picks exactly those
    // placements.
    RngStream rng(77);
    std::vector<std::array<std::size_t, 3>> expected;
    for (int i = 0; i < 4; ++i) {
        rng.uniform01(); // apply gate, always below prob=1
        const std::size_t r = 15 + rng.uniform_index(2);
        const std::size_t oy = rng.uniform_index(16 - r + 1);
        const std::size_t ox = rng.uniform_index(16 - r + 1);
        expected.push_back({r, oy, ox});
    }
    ViTConfig cfg = tiny_config();
    Tensor x = random_image(cfg, 3);
    RngStream replay(77);
    for (const auto& [r, oy, ox] : expected) {
        Tensor out = dim_transform(x, 1.0, replay);
        Tensor direct = resize_pad_nearest(x, r, oy, ox);
        CHECK(bit_equal(out, direct));
    }
}

TEST_CASE("sim_gradient with one scale equals the plain gradient") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 4);
    Tensor x = random_image(cfg, 5);
    RestructurePolicy disabled = RestructurePolicy::disabled(cfg.num_blocks);

    Tensor via_sim = sim_gradient(x, 2, model, disabled, 1);

    Tensor leaf = x.clone(true);
    backward(cross_entropy_loss(model.forward(leaf, disabled), 2));
    Tensor direct = Tensor::from_span(leaf.shape(), leaf.grad());
    for (std::size_t i = 0; i < direct.size(); ++i)
        CHECK(via_sim.values()[i] == doctest::Approx(direct.values()[i]).epsilon(1e-12));
}

TEST_CASE("sim_gradient with frozen gates equals the mean of per-scale gradients") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 6);
    Tensor x = random_image(cfg, 7);
    RestructurePolicy disabled = RestructurePolicy::disabled(cfg.num_blocks);

    Tensor combined = sim_gradient(x, 1, model, disabled, 3);

    std::vector<double> mean(x.size(), 0.0);
    for (int s = 0; s < 3; ++s) {
        Tensor leaf = x.clone(true);
        Tensor scaled = scale(leaf, std::pow(2.0, -s));
        backward(cross_entropy_loss(model.forward(scaled, disabled), 1));
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += leaf.grad()[i] / 3.0;
    }
    for (std::size_t i = 0; i < mean.size(); ++i)
        CHECK(combined.values()[i] == doctest::Approx(mean[i]).epsilon(1e-10));
}

TEST_CASE("run_attack with zero iterations returns the input unchanged") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 8);
    Tensor x = random_image(cfg, 9);
    AttackConfig ac = tiny_attack(AttackMethod::mim, false);
    ac.iterations = 0;
    AdversarialExample ex = run_attack(x, 1, model, ac);
    CHECK(bit_equal(ex.adversarial, x));
    CHECK(ex.linf() == 0.0);
}

TEST_CASE("run_attack keeps the budget and pixel range at every iteration") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 10);
    Tensor x = random_image(cfg, 11);
    AttackConfig ac = tiny_attack(AttackMethod::mim, true, 0.5);
    ac.iterations = 10;
    std::size_t observed = 0;
    AdversarialExample ex =
        run_attack(x, 2, model, ac, 0, [&](std::uint64_t, std::size_t, const Tensor& x_adv) {
            ++observed;
            const auto xv = x.values();
            const auto av = x_adv.values();
            for (std::size_t i = 0; i < av.size(); ++i) {
                CHECK(std::abs(av[i] - xv[i]) <= 16.0);
                CHECK(av[i] >= 0.0);
                CHECK(av[i] <= 255.0);
            }
        });
    CHECK(observed == 10);
    CHECK(ex.linf() <= 16.0);
}

TEST_CASE("P=0 restructuring attacks are bit-identical to the plain baselines") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 12);
    Tensor x = random_image(cfg, 13);
    for (AttackMethod method : {AttackMethod::mim, AttackMethod::dim, AttackMethod::sim}) {
        AdversarialExample base = run_attack(x, 3, model, tiny_attack(method, false), 5);
        AdversarialExample gated = run_attack(x, 3, model, tiny_attack(method, true, 0.0), 5);
        CHECK(bit_equal(base.adversarial, gated.adversarial));
    }
}

TEST_CASE("run_attack is deterministic in (seed, config, image)") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 14);
    Tensor x = random_image(cfg, 15);
    AttackConfig ac = tiny_attack(AttackMethod::dim, true, 0.4);
    AdversarialExample a = run_attack(x, 0, model, ac, 7);
    AdversarialExample b = run_attack(x, 0, model, ac, 7);
    CHECK(bit_equal(a.adversarial, b.adversarial));

    AttackConfig other = ac;
    other.seed = ac.seed + 1;
    AdversarialExample c = run_attack(x, 0, model, other, 7);
    CHECK(!bit_equal(a.adversarial, c.adversarial));
}

TEST_CASE("SAPR attacks differ from baselines once gates can open") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 16);
    Tensor x = random_image(cfg, 17);
    // Sign-free updates expose the changed gradient directly; with sign steps
    // a tiny random model can mask restructuring behind identical signs.
    AttackConfig plain = tiny_attack(AttackMethod::mim, false);
    plain.sign_update = false;
    plain.alpha = 50.0;
    AttackConfig gated_cfg = tiny_attack(AttackMethod::mim, true, 0.9);
    gated_cfg.sign_update = false;
    gated_cfg.alpha = 50.0;
    AdversarialExample base = run_attack(x, 1, model, plain);
    AdversarialExample gated = run_attack(x, 1, model, gated_cfg);
    CHECK(!bit_equal(base.adversarial, gated.adversarial));
}

TEST_CASE("run_attack_batch matches per-image run_attack and guards shared weights") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 18);
    std::vector<Tensor> images{random_image(cfg, 19), random_image(cfg, 20), random_image(cfg, 21)};
    std::vector<std::size_t> labels{0, 1, 2};
    AttackConfig ac = tiny_attack(AttackMethod::mim, true, 0.5);

    auto batch = run_attack_batch(images, labels, model, ac, 2);
    REQUIRE(batch.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        AdversarialExample single = run_attack(images[i], labels[i], model, ac, i);
        CHECK(bit_equal(batch[i].adversarial, single.adversarial));
    }

    model.set_requires_grad(true);
    CHECK_THROWS_AS(run_attack_batch(images, labels, model, ac, 2), ContractError);
}

TEST_CASE("white-box cross entropy grows in expectation over the attack") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 22);
    AttackConfig ac = tiny_attack(AttackMethod::mim, false);
    ac.iterations = 8;
    RestructurePolicy disabled = RestructurePolicy::disabled(cfg.num_blocks);
    double delta_sum = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        Tensor x = random_image(cfg, 100 + i);
        const std::size_t label = i % cfg.num_classes;
        const double before = cross_entropy_loss(model.forward(x, disabled), label).item();
        AdversarialExample ex = run_attack(x, label, model, ac, i);
        const double after =
            cross_entropy_loss(model.forward(ex.adversarial, disabled), label).item();
        delta_sum += after - before;
    }
    CHECK(delta_sum / 20.0 > 0.0);
}

TEST_CASE("quantize_to_pixel_grid keeps the budget on the integer grid") {
    ViTConfig cfg = tiny_config();
    ViTModel model = ViTModel::random_init(cfg, 23);
    Tensor x = random_image(cfg, 24);
    AttackConfig ac = tiny_attack(AttackMethod::mim, false);
    AdversarialExample ex = run_attack(x, 1, model, ac);
    AdversarialExample q = quantize_to_pixel_grid(ex, ac.epsilon);
    CHECK(q.linf() <= ac.epsilon);
    for (double v : q.adversarial.values()) {
        CHECK(v == std::nearbyint(v));
        CHECK(v >= 0.0);
        CHECK(v <= 255.0);
    }
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(q.adversarial.values()[i] - ex.adversarial.values()[i]) <= 0.5);
}

TEST_CASE("attack config validation") {
    AttackConfig ac;
    ac.epsilon = 0.0;
    CHECK_THROWS_AS(ac.validate(), ConfigError);
    ac = AttackConfig{};
    ac.sim_scales = 0;
    CHECK_THROWS_AS(ac.validate(), ConfigError);
    ac = AttackConfig{};
    ac.sapr_enabled = true;
    ac.restructure_threshold = 1.5;
    CHECK_THROWS_AS(ac.validate(), ConfigError);
    ac.gate_mode = GateMode::gaussian;
    CHECK_NOTHROW(ac.validate());
    CHECK(AttackConfig{}.resolved_alpha() == doctest::Approx(16.0 / 50.0));
}
