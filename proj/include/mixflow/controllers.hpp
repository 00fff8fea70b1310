#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mixflow/mdp.hpp"
#include "mixflow/sac.hpp"
#include "mixflow/sim.hpp"

namespace mixflow {

struct TlPhase {
    std::vector<ConnectorId> green;  // sorted
    double green_s = 30.0;
    double yellow_s = 3.0;

    bool operator==(const TlPhase&) const = default;
};

/// Fixed-time signal program. Each phase runs green, yellow, then the
/// all-red interval; the cycle is the sum over phases.
struct TlProgram {
    std::vector<TlPhase> phases;
    double all_red_s = 2.0;

    double cycle() const;
    /// Throws ValidationError on nonpositive durations and ConfigError when a
    /// signalized connector (one leaving an incoming road) is in no phase.
    void validate(const NetworkGraph& g) const;

    bool operator==(const TlProgram&) const = default;
};

/// Connectors whose from lane lies on an incoming road edge.
std::vector<ConnectorId> signalized_connectors(const NetworkGraph& g);

enum class Signal { Green, Yellow, Red };

Signal signal_at(const TlProgram& p, double clock, ConnectorId c);

enum class Gate { NotApplicable, Proceed, Hold };

/// Applies to vehicles on an incoming road lane with a connector ahead.
/// Yellow: proceed only if the vehicle cannot stop comfortably
/// (v^2 / 2b >= distance to the stop line).
Gate tl_gate(const TlProgram& p, double clock, const VehicleState& v, const NetworkGraph& g, const IdmParams& idm);

/// One phase group per pair of opposing legs (round-robin), each group split
/// greedily so that no two conflicting connectors share a phase.
TlProgram default_tl_program(const NetworkGraph& g, double green_s = 30.0, double yellow_s = 3.0,
                             double all_red_s = 2.0);

/// True when no phase holds two mutually conflicting connectors.
bool program_conflict_free(const TlProgram& p, const NetworkGraph& g);

enum class PolicyMode { Deterministic, Stochastic };

/// Decentralized action selection: sees only the vehicle's own observation.
double policy_act(const Observation& obs, const PolicyParams& params, PolicyMode mode, RngStream& rng);

class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    /// Commands for the coming step. May draw from `state.policy_rng`.
    virtual StepCommands decide(SimState& state, const NetworkGraph& g, const SimConfig& cfg) = 0;
};

/// No commands: every vehicle follows IDM without junction gating.
class NoTlController final : public Controller {
public:
    std::string name() const override { return "NoTL"; }
    StepCommands decide(SimState&, const NetworkGraph&, const SimConfig&) override { return {}; }
};

class TlController final : public Controller {
public:
    explicit TlController(TlProgram program) : program_(std::move(program)) {}
    std::string name() const override { return "TL"; }
    StepCommands decide(SimState& state, const NetworkGraph& g, const SimConfig& cfg) override;
    const TlProgram& program() const { return program_; }

private:
    TlProgram program_;
};

/// Shared learned policy applied to every robot vehicle in the control zone.
class PolicyController final : public Controller {
public:
    PolicyController(std::shared_ptr<const PolicyParams> params, ObsConfig obs, PolicyMode mode)
        : params_(std::move(params)), obs_(obs), mode_(mode) {}
    std::string name() const override { return "Policy"; }
    StepCommands decide(SimState& state, const NetworkGraph& g, const SimConfig& cfg) override;

private:
    std::shared_ptr<const PolicyParams> params_;
    ObsConfig obs_;
    PolicyMode mode_;
};

}  // namespace mixflow
