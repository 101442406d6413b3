#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sapr/restructure.hpp"
#include "sapr/rng.hpp"
#include "sapr/tensor.hpp"
#include "sapr/vit.hpp"

namespace sapr {

enum class AttackMethod { mim, dim, sim };

const char* attack_method_name(AttackMethod method);
AttackMethod attack_method_from_name(const std::string& name);

struct AttackConfig {
    /// L∞ budget and step size in pixel units on the 0-255 scale.
    double epsilon = 16.0;
    /// 0 resolves to epsilon / iterations.
    double alpha = 0.0;
    std::size_t iterations = 50;
    AttackMethod method = AttackMethod::mim;
    bool sapr_enabled = false;
    double restructure_threshold = 0.0;
    GateMode gate_mode = GateMode::uniform;
    double momentum_decay = 1.0;
    double dim_transform_prob = 0.5;
    std::size_t sim_scales = 5;
    /// Step with sign(momentum) (standard MI-FGSM). When false the raw
    /// momentum vector is used instead.
    bool sign_update = true;
    std::uint64_t seed = 0;

    void validate() const;
    double resolved_alpha() const;
};

struct AdversarialExample {
    Tensor original;
    Tensor adversarial;
    std::size_t label = 0;
    std::size_t clean_prediction = 0;
    std::size_t adversarial_prediction = 0;

    Tensor delta() const;
    double linf() const;
};

/// Elementwise projection of x_adv into [x-ε, x+ε] ∩ [0,255].
Tensor clip_to_budget(const Tensor& x_adv, const Tensor& x, double epsilon);

struct MimStep {
    Tensor momentum;
    Tensor x_adv;
};

/// One momentum update: g ← μ·g + grad/‖grad‖₁ (normalization skipped for an
/// all-zero gradient), then a clipped step along sign(g).
MimStep mim_step(const Tensor& momentum, const Tensor& gradient, double mu, double alpha,
                 const Tensor& x_adv, const Tensor& x, double epsilon, bool sign_update = true);

/// With probability prob: nearest-neighbour downscale to a random
/// r ∈ [⌈0.9S⌉, S] and random zero-pad back to S×S; otherwise identity.
/// Differentiable through the resize. Draw order per call: apply?, r, off_y,
/// off_x.
Tensor dim_transform(const Tensor& x, double prob, RngStream& rng);

/// (1/m)·Σᵢ ∇ₓ J(F(x/2ⁱ, P), y); every scaled forward resamples the gates
/// with counter gate_counter_base + i.
Tensor sim_gradient(const Tensor& x_adv, std::size_t label, const ViTModel& model,
                    RestructurePolicy& policy, std::size_t scales,
                    std::uint64_t gate_counter_base = 0);

using IterationObserver =
    std::function<void(std::uint64_t image_id, std::size_t iteration, const Tensor& x_adv)>;

/// Full attack loop: per iteration, sample gates, compute the method's
/// gradient, take a momentum step, project to the budget. The budget
/// invariant holds after every iteration; `observer`, when set, sees each
/// intermediate x_adv.
AdversarialExample run_attack(const Tensor& x, std::size_t label, const ViTModel& model,
                              const AttackConfig& cfg, std::uint64_t image_id = 0,
                              const IterationObserver& observer = {});

/// Parallel per-image attacks sharing read-only weights. Weights must not
/// require gradients. Results are deterministic for any worker count.
std::vector<AdversarialExample> run_attack_batch(std::span<const Tensor> images,
                                                 std::span<const std::size_t> labels,
                                                 const ViTModel& model, const AttackConfig& cfg,
                                                 std::size_t workers = 0,
                                                 const IterationObserver& observer = {});

/// Rounds an example's adversarial image to the integer pixel grid and
/// re-projects into the budget, so exported 8-bit files carry exactly the
/// evaluated pixels. Predictions are left untouched.
AdversarialExample quantize_to_pixel_grid(const AdversarialExample& example, double epsilon);

} // namespace sapr
