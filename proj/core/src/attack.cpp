#include "sapr/attack.hpp"

#include <algorithm>
#include <cmath>

#include "sapr/parallel.hpp"

namespace sapr {

namespace {
constexpr std::uint64_t kPolicyTag = 0x706f6c6963ull; // "polic"
constexpr std::uint64_t kDimTag = 0x64696dull;        // "dim"
// Gate counters advance in strides of 1024 per iteration so SIM sub-passes
// get distinct counters below the next iteration's base.
constexpr std::uint64_t kCounterStride = 1024;
} // namespace

const char* attack_method_name(AttackMethod method) {
    switch (method) {
        case AttackMethod::mim: return "MIM";
        case AttackMethod::dim: return "DIM";
        case AttackMethod::sim: return "SIM";
    }
    return "?";
}

AttackMethod attack_method_from_name(const std::string& name) {
    if (name == "MIM" || name == "mim") return AttackMethod::mim;
    if (name == "DIM" || name == "dim") return AttackMethod::dim;
    if (name == "SIM" || name == "sim") return AttackMethod::sim;
    throw ConfigError("unknown attack method '" + name + "' (expected MIM, DIM or SIM)");
}

void AttackConfig::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("attack: epsilon must be positive");
    if (alpha < 0.0) throw ConfigError("attack: alpha must be non-negative");
    if (momentum_decay < 0.0) throw ConfigError("attack: momentum decay must be non-negative");
    if (dim_transform_prob < 0.0 || dim_transform_prob > 1.0)
        throw ConfigError("attack: dim_transform_prob must lie in [0,1]");
    if (sim_scales < 1 || sim_scales >= kCounterStride)
        throw ConfigError("attack: sim_scales must lie in [1," + std::to_string(kCounterStride - 1) + "]");
    if (sapr_enabled && gate_mode == GateMode::uniform &&
        (restructure_threshold < 0.0 || restructure_threshold > 1.0))
        throw ConfigError("attack: restructure threshold must lie in [0,1] in uniform mode");
}

double AttackConfig::resolved_alpha() const {
    if (alpha > 0.0) return alpha;
    return epsilon / static_cast<double>(std::max<std::size_t>(iterations, 1));
}

Tensor AdversarialExample::delta() const {
    const auto a = adversarial.values();
    const auto o = original.values();
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - o[i];
    return Tensor::from_vector(original.shape(), std::move(d));
}

double AdversarialExample::linf() const {
    const auto a = adversarial.values();
    const auto o = original.values();
    double mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - o[i]));
    return mx;
}

Tensor clip_to_budget(const Tensor& x_adv, const Tensor& x, double epsilon) {
    if (x_adv.shape() != x.shape())
        throw ShapeError("clip_to_budget: shape mismatch " + shape_to_string(x_adv.shape()) + " vs " +
                         shape_to_string(x.shape()));
    const auto av = x_adv.values();
    const auto xv = x.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = std::clamp(av[i], xv[i] - epsilon, xv[i] + epsilon);
        out[i] = std::clamp(v, 0.0, 255.0);
    }
    return Tensor::from_vector(x.shape(), std::move(out));
}

MimStep mim_step(const Tensor& momentum, const Tensor& gradient, double mu, double alpha,
                 const Tensor& x_adv, const Tensor& x, double epsilon, bool sign_update) {
    if (momentum.shape() != gradient.shape() || gradient.shape() != x_adv.shape() ||
        x_adv.shape() != x.shape())
        throw ShapeError("mim_step: all operands must share one shape");
    const auto mv = momentum.values();
    const auto gv = gradient.values();
    double l1 = 0.0;
    for (double g : gv) l1 += std::abs(g);

    std::vector<double> next_m(mv.size());
    for (std::size_t i = 0; i < next_m.size(); ++i) {
        const double normalized = l1 > 0.0 ? gv[i] / l1 : 0.0;
        next_m[i] = mu * mv[i] + normalized;
    }
    const auto av = x_adv.values();
    std::vector<double> stepped(av.size());
    for (std::size_t i = 0; i < stepped.size(); ++i) {
        const double dir = sign_update
                               ? (next_m[i] > 0.0 ? 1.0 : (next_m[i] < 0.0 ? -1.0 : 0.0))
                               : next_m[i];
        stepped[i] = av[i] + alpha * dir;
    }
    Tensor momentum_out = Tensor::from_vector(momentum.shape(), std::move(next_m));
    Tensor x_out = clip_to_budget(Tensor::from_vector(x.shape(), std::move(stepped)), x, epsilon);
    return {momentum_out, x_out};
}

Tensor dim_transform(const Tensor& x, double prob, RngStream& rng) {
    if (x.rank() != 3 || x.extent(1) != x.extent(2))
        throw ShapeError("dim_transform: expected [C×S×S], got " + shape_to_string(x.shape()));
    const std::size_t s = x.extent(1);
    const double u = rng.uniform01();
    if (u >= prob) return x;
    const std::size_t lo = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(s)));
    const std::size_t r = lo + rng.uniform_index(s - lo + 1);
    const std::size_t off_y = rng.uniform_index(s - r + 1);
    const std::size_t off_x = rng.uniform_index(s - r + 1);
    return resize_pad_nearest(x, r, off_y, off_x);
}

Tensor sim_gradient(const Tensor& x_adv, std::size_t label, const ViTModel& model,
                    RestructurePolicy& policy, std::size_t scales,
                    std::uint64_t gate_counter_base) {
    if (scales < 1) throw ConfigError("sim_gradient: scales must be >= 1");
    Tensor leaf = x_adv.clone(/*requires_grad=*/true);
    const double inv_m = 1.0 / static_cast<double>(scales);
    Tensor total;
    for (std::size_t i = 0; i < scales; ++i) {
        if (policy.enabled())
            policy.sample_gates(model.config().num_patches(), gate_counter_base + i);
        Tensor scaled = scale(leaf, std::pow(2.0, -static_cast<double>(i)));
        Tensor loss = cross_entropy_loss(model.forward(scaled, policy), label);
        Tensor contrib = scale(loss, inv_m);
        total = i == 0 ? contrib : add(total, contrib);
    }
    backward(total);
    return Tensor::from_span(leaf.shape(), leaf.grad());
}

AdversarialExample run_attack(const Tensor& x, std::size_t label, const ViTModel& model,
                              const AttackConfig& cfg, std::uint64_t image_id,
                              const IterationObserver& observer) {
    cfg.validate();
    const std::size_t num_blocks = model.config().num_blocks;
    const std::size_t num_patches = model.config().num_patches();
    RestructurePolicy policy =
        cfg.sapr_enabled
            ? RestructurePolicy(cfg.restructure_threshold, num_blocks, cfg.gate_mode,
                                RngStream::mix_keys(cfg.seed, {image_id, kPolicyTag}))
            : RestructurePolicy::disabled(num_blocks);
    RngStream dim_rng(cfg.seed, {image_id, kDimTag});

    Tensor x_adv = x.clone();
    Tensor momentum = Tensor::zeros(x.shape());
    const double alpha = cfg.resolved_alpha();

    for (std::size_t t = 0; t < cfg.iterations; ++t) {
        const std::uint64_t counter = static_cast<std::uint64_t>(t) * kCounterStride;
        Tensor gradient;
        if (cfg.method == AttackMethod::sim) {
            gradient = sim_gradient(x_adv, label, model, policy, cfg.sim_scales, counter);
        } else {
            if (policy.enabled()) policy.sample_gates(num_patches, counter);
            Tensor leaf = x_adv.clone(/*requires_grad=*/true);
            Tensor input =
                cfg.method == AttackMethod::dim ? dim_transform(leaf, cfg.dim_transform_prob, dim_rng)
                                                : leaf;
            Tensor loss = cross_entropy_loss(model.forward(input, policy), label);
            backward(loss);
            gradient = Tensor::from_span(leaf.shape(), leaf.grad());
        }
        MimStep step = mim_step(momentum, gradient, cfg.momentum_decay, alpha, x_adv, x, cfg.epsilon,
                                cfg.sign_update);
        momentum = step.momentum;
        x_adv = step.x_adv;
        if (observer) observer(image_id, t, x_adv);
    }

    AdversarialExample out;
    out.original = x.clone();
    out.adversarial = x_adv;
    out.label = label;
    out.clean_prediction = model.predict(x);
    out.adversarial_prediction = model.predict(x_adv);
    return out;
}

std::vector<AdversarialExample> run_attack_batch(std::span<const Tensor> images,
                                                 std::span<const std::size_t> labels,
                                                 const ViTModel& model, const AttackConfig& cfg,
                                                 std::size_t workers,
                                                 const IterationObserver& observer) {
    if (images.size() != labels.size())
        throw ContractError("run_attack_batch: image/label count mismatch");
    for (const auto& [name, t] : model.named_parameters())
        if (t.requires_grad())
            throw ContractError("run_attack_batch: weights must not require gradients; call "
                                "set_requires_grad(false) first");
    std::vector<AdversarialExample> out(images.size());
    parallel_for(images.size(), workers, [&](std::size_t i) {
        out[i] = run_attack(images[i], labels[i], model, cfg, static_cast<std::uint64_t>(i), observer);
    });
    return out;
}

AdversarialExample quantize_to_pixel_grid(const AdversarialExample& example, double epsilon) {
    const auto av = example.adversarial.values();
    const auto ov = example.original.values();
    std::vector<double> q(av.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        double v = std::nearbyint(av[i]);
        v = std::clamp(v, ov[i] - epsilon, ov[i] + epsilon);
        q[i] = std::clamp(v, 0.0, 255.0);
    }
    AdversarialExample out = example;
    out.adversarial = Tensor::from_vector(example.adversarial.shape(), std::move(q));
    return out;
}

} // namespace sapr
