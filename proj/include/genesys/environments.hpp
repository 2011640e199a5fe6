#pragma once

// Native control tasks with a uniform reset/step interface.
//
// cartpole    classic cart-pole (Barto, Sutton & Anderson 1983): g=9.8, m_cart=1.0,
//             m_pole=0.1, half-length 0.5, force 10, tau 0.02, explicit Euler;
//             fails past 12 degrees or |x| > 2.4; +1 per step; 200 steps max.
// mountaincar hill climb (Moore 1990): force 0.001, gravity 0.0025,
//             x in [-1.2, 0.6], |v| <= 0.07, goal x >= 0.5; -1 per step and a
//             +200 bonus on the goal step; 200 steps max.
// xor         four cases per episode in fixed order; reward 1 - (y - t)^2 with
//             y clipped to [0, 1], so a perfect network scores 4.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "genesys/adam.hpp"
#include "genesys/xorwow.hpp"

namespace genesys {

enum class ActionKind : std::uint8_t { binary, discrete, continuous };

struct EnvSpec {
    std::string name;
    std::size_t observation_size = 0;
    ActionKind action_kind = ActionKind::binary;
    std::size_t action_size = 1;  // network outputs consumed
    std::size_t max_steps = 0;
    double target_fitness = 0.0;
};

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
};

enum class Termination : std::uint8_t { none, failure, goal, step_limit, finished };

struct EpisodeResult {
    double total_reward = 0.0;
    std::size_t steps = 0;
    Termination terminated = Termination::none;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    /// `outputs` are raw network outputs; mapping to a task action happens here.
    virtual StepResult step(std::span<const double> outputs) = 0;
    virtual Termination termination() const = 0;
};

namespace detail {

inline void check_outputs(const EnvSpec& spec, std::span<const double> outputs) {
    if (outputs.size() != spec.action_size)
        throw Error(spec.name + ": expected " + std::to_string(spec.action_size) + " action values, got " +
                    std::to_string(outputs.size()));
    for (double v : outputs)
        if (!std::isfinite(v))
            throw Error(spec.name + ": non-finite action value");
}

/// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

} // namespace detail

class CartPole final : public Environment {
public:
    static EnvSpec make_spec() { return {"cartpole", 4, ActionKind::binary, 1, 200, 195.0}; }

    const EnvSpec& spec() const override { return spec_; }

    std::vector<double> reset(std::uint64_t seed) override {
        XorWowState rng = seed_stream(seed, 0);
        for (double& s : state_)
            s = -0.05 + 0.1 * rng.next_unit();
        steps_ = 0;
        why_ = Termination::none;
        return {state_.begin(), state_.end()};
    }

    StepResult step(std::span<const double> outputs) override {
        detail::check_outputs(spec_, outputs);
        if (why_ != Termination::none)
            throw Error("cartpole: step after episode end");
        constexpr double gravity = 9.8, masscart = 1.0, masspole = 0.1, length = 0.5, force_mag = 10.0,
                         tau = 0.02;
        constexpr double total_mass = masscart + masspole;
        constexpr double polemass_length = masspole * length;
        constexpr double theta_limit = 12.0 * 2.0 * std::numbers::pi / 360.0;
        constexpr double x_limit = 2.4;

        const double force = outputs[0] >= 0.5 ? force_mag : -force_mag;
        auto& [x, x_dot, theta, theta_dot] = state_;
        const double cos_t = std::cos(theta), sin_t = std::sin(theta);
        const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
        const double theta_acc = (gravity * sin_t - cos_t * temp) /
                                 (length * (4.0 / 3.0 - masspole * cos_t * cos_t / total_mass));
        const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
        x += tau * x_dot;
        x_dot += tau * x_acc;
        theta += tau * theta_dot;
        theta_dot += tau * theta_acc;
        ++steps_;

        StepResult r;
        r.observation.assign(state_.begin(), state_.end());
        r.reward = 1.0;
        if (x < -x_limit || x > x_limit || theta < -theta_limit || theta > theta_limit)
            why_ = Termination::failure;
        else if (steps_ >= spec_.max_steps)
            why_ = Termination::step_limit;
        r.done = why_ != Termination::none;
        return r;
    }

    Termination termination() const override { return why_; }

private:
    EnvSpec spec_ = make_spec();
    std::array<double, 4> state_{};
    std::size_t steps_ = 0;
    Termination why_ = Termination::none;
};

class MountainCar final : public Environment {
public:
    static constexpr double kGoalBonus = 200.0;
    static EnvSpec make_spec() { return {"mountaincar", 2, ActionKind::discrete, 3, 200, 90.0}; }

    const EnvSpec& spec() const override { return spec_; }

    std::vector<double> reset(std::uint64_t seed) override {
        XorWowState rng = seed_stream(seed, 0);
        position_ = -0.6 + 0.2 * rng.next_unit();
        velocity_ = 0.0;
        steps_ = 0;
        why_ = Termination::none;
        return {position_, velocity_};
    }

    StepResult step(std::span<const double> outputs) override {
        detail::check_outputs(spec_, outputs);
        if (why_ != Termination::none)
            throw Error("mountaincar: step after episode end");
        const auto action = static_cast<double>(detail::argmax(outputs));  // 0 left, 1 coast, 2 right
        velocity_ += (action - 1.0) * 0.001 + std::cos(3.0 * position_) * -0.0025;
        velocity_ = std::clamp(velocity_, -0.07, 0.07);
        position_ += velocity_;
        position_ = std::clamp(position_, -1.2, 0.6);
        if (position_ == -1.2 && velocity_ < 0.0)
            velocity_ = 0.0;
        ++steps_;

        StepResult r;
        r.observation = {position_, velocity_};
        r.reward = -1.0;
        if (position_ >= 0.5) {
            r.reward += kGoalBonus;
            why_ = Termination::goal;
        } else if (steps_ >= spec_.max_steps) {
            why_ = Termination::step_limit;
        }
        r.done = why_ != Termination::none;
        return r;
    }

    Termination termination() const override { return why_; }

private:
    EnvSpec spec_ = make_spec();
    double position_ = 0.0;
    double velocity_ = 0.0;
    std::size_t steps_ = 0;
    Termination why_ = Termination::none;
};

class XorTask final : public Environment {
public:
    static EnvSpec make_spec() { return {"xor", 2, ActionKind::continuous, 1, 4, 3.9}; }

    const EnvSpec& spec() const override { return spec_; }

    std::vector<double> reset(std::uint64_t) override {
        case_ = 0;
        why_ = Termination::none;
        return observation(0);
    }

    StepResult step(std::span<const double> outputs) override {
        detail::check_outputs(spec_, outputs);
        if (why_ != Termination::none)
            throw Error("xor: step after episode end");
        const double y = std::clamp(outputs[0], 0.0, 1.0);
        const double target = static_cast<double>((case_ & 1u) ^ (case_ >> 1));
        StepResult r;
        r.reward = 1.0 - (y - target) * (y - target);
        ++case_;
        if (case_ == 4) {
            why_ = Termination::finished;
            r.done = true;
            r.observation = observation(0);
        } else {
            r.observation = observation(case_);
        }
        return r;
    }

    Termination termination() const override { return why_; }

private:
    static std::vector<double> observation(std::uint32_t c) {
        return {static_cast<double>(c >> 1), static_cast<double>(c & 1u)};
    }

    EnvSpec spec_ = make_spec();
    std::uint32_t case_ = 0;
    Termination why_ = Termination::none;
};

inline std::unique_ptr<Environment> make_environment(const std::string& name) {
    if (name == "cartpole")
        return std::make_unique<CartPole>();
    if (name == "mountaincar")
        return std::make_unique<MountainCar>();
    if (name == "xor")
        return std::make_unique<XorTask>();
    throw ConfigError("unknown environment '" + name + "' (expected cartpole, mountaincar or xor)");
}

inline EnvSpec env_spec(const std::string& name) { return make_environment(name)->spec(); }

struct FitnessResult {
    double fitness = 0.0;
    std::uint64_t adam_cycles = 0;
    std::uint64_t mac_count = 0;
    std::uint64_t inferences = 0;
    std::vector<EpisodeResult> episodes;
};

/// Mean episode reward with every action computed by packed inference.
/// Episode e is seeded with derive_seed(seed, e).
inline FitnessResult evaluate_fitness(const Genome& g, Environment& env, std::size_t episodes, std::uint64_t seed,
                                      const HwConfig& hw = {}) {
    const EnvSpec& spec = env.spec();
    if (g.num_inputs != spec.observation_size || g.num_outputs != spec.action_size)
        throw Error("genome I/O shape does not match environment " + spec.name);
    if (episodes == 0)
        throw ConfigError("episodes must be >= 1");
    const CompiledNetwork net(g, hw);
    std::vector<double> scratch;
    std::vector<double> outputs(spec.action_size);

    FitnessResult r;
    double sum = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        EpisodeResult ep;
        std::vector<double> obs = env.reset(derive_seed(seed, e));
        for (;;) {
            net.run(obs, scratch, outputs);
            ++r.inferences;
            StepResult s = env.step(outputs);
            ep.total_reward += s.reward;
            ++ep.steps;
            if (s.done)
                break;
            obs = std::move(s.observation);
        }
        ep.terminated = env.termination();
        sum += ep.total_reward;
        r.episodes.push_back(ep);
    }
    r.fitness = sum / static_cast<double>(episodes);
    r.adam_cycles = r.inferences * net.cycles_per_inference();
    r.mac_count = r.inferences * net.macs_per_inference();
    return r;
}

inline FitnessResult evaluate_fitness(const Genome& g, const std::string& env_name, std::size_t episodes,
                                      std::uint64_t seed, const HwConfig& hw = {}) {
    auto env = make_environment(env_name);
    return evaluate_fitness(g, *env, episodes, seed, hw);
}

} // namespace genesys
