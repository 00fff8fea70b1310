#include "mixflow/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mixflow/error.hpp"

namespace mixflow {

double TlProgram::cycle() const {
    double c = 0.0;
    for (const auto& ph : phases) c += ph.green_s + ph.yellow_s + all_red_s;
    return c;
}

std::vector<ConnectorId> signalized_connectors(const NetworkGraph& g) {
    std::vector<ConnectorId> out;
    for (const auto& c : g.connectors()) {
        const Lane& from = g.lane(c.from_lane);
        if (!from.is_connector() && g.edge(from.edge).role == EdgeRole::Incoming) out.push_back(c.id);
    }
    return out;
}

void TlProgram::validate(const NetworkGraph& g) const {
    if (phases.empty()) throw ValidationError("phases", "program has no phases");
    if (!(all_red_s >= 0.0)) throw ValidationError("all_red_s", "must be nonnegative");
    std::set<ConnectorId> covered;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& ph = phases[i];
        const std::string at = "phases[" + std::to_string(i) + "]";
        if (!(ph.green_s > 0.0)) throw ValidationError(at + ".green_s", "must be positive");
        if (!(ph.yellow_s > 0.0)) throw ValidationError(at + ".yellow_s", "must be positive");
        for (ConnectorId c : ph.green) {
            if (c < 0 || static_cast<std::size_t>(c) >= g.connectors().size()) {
                throw ReferenceError(at + ".green: unknown connector " + std::to_string(c));
            }
            covered.insert(c);
        }
    }
    for (ConnectorId c : signalized_connectors(g)) {
        if (!covered.contains(c)) {
            throw ConfigError("connector " + g.lane(g.connector(c).lane).name + " is not green in any phase");
        }
    }
}

Signal signal_at(const TlProgram& p, double clock, ConnectorId c) {
    const double cycle = p.cycle();
    double t = std::fmod(clock, cycle);
    if (t < 0.0) t += cycle;
    for (const auto& ph : p.phases) {
        const double span = ph.green_s + ph.yellow_s + p.all_red_s;
        if (t < span) {
            if (!std::binary_search(ph.green.begin(), ph.green.end(), c)) return Signal::Red;
            if (t < ph.green_s) return Signal::Green;
            if (t < ph.green_s + ph.yellow_s) return Signal::Yellow;
            return Signal::Red;
        }
        t -= span;
    }
    return Signal::Red;
}

Gate tl_gate(const TlProgram& p, double clock, const VehicleState& v, const NetworkGraph& g, const IdmParams& idm) {
    const Lane& lane = g.lane(v.lane);
    if (lane.is_connector() || g.edge(lane.edge).role != EdgeRole::Incoming) return Gate::NotApplicable;
    const ConnectorId c = upcoming_connector(v, g);
    if (c == kNone) return Gate::NotApplicable;
    switch (signal_at(p, clock, c)) {
        case Signal::Green:
            return Gate::Proceed;
        case Signal::Yellow: {
            const double braking = v.speed * v.speed / (2.0 * idm.comfort_decel);
            return braking >= lane.length() - v.offset ? Gate::Proceed : Gate::Hold;
        }
        case Signal::Red:
            break;
    }
    return Gate::Hold;
}

namespace {

bool conflicts(const NetworkGraph& g, ConnectorId a, ConnectorId b) {
    const auto& c = g.connector(a).conflicts;
    return std::binary_search(c.begin(), c.end(), b);
}

// Signed heading change along the connector, negative for right turns.
double turn_angle(const NetworkGraph& g, ConnectorId c) {
    const Polyline& shape = g.lane(g.connector(c).lane).shape;
    const Vec2 a = shape.heading_at(0.0);
    const Vec2 b = shape.heading_at(shape.length());
    return std::atan2(a.cross(b), a.dot(b));
}

}  // namespace

TlProgram default_tl_program(const NetworkGraph& g, double green_s, double yellow_s, double all_red_s) {
    std::map<int, std::vector<ConnectorId>> by_leg;
    for (ConnectorId c : signalized_connectors(g)) by_leg[g.edge(g.lane(g.connector(c).from_lane).edge).leg].push_back(c);
    std::vector<int> legs;
    for (const auto& [leg, cs] : by_leg) legs.push_back(leg);
    const std::size_t half = (legs.size() + 1) / 2;

    TlProgram p;
    p.all_red_s = all_red_s;
    for (std::size_t k = 0; k < half; ++k) {
        std::vector<ConnectorId> group = by_leg[legs[k]];
        if (k + half < legs.size()) {
            const auto& other = by_leg[legs[k + half]];
            group.insert(group.end(), other.begin(), other.end());
        }
        // Right turns, then through movements, then left turns.
        std::vector<std::pair<double, ConnectorId>> order;
        for (ConnectorId c : group) order.emplace_back(turn_angle(g, c), c);
        std::sort(order.begin(), order.end());
        std::vector<TlPhase> sub;
        for (const auto& [angle, c] : order) {
            auto fits = [&](const TlPhase& ph) {
                return std::none_of(ph.green.begin(), ph.green.end(), [&](ConnectorId o) { return conflicts(g, c, o); });
            };
            auto it = std::find_if(sub.begin(), sub.end(), fits);
            if (it == sub.end()) {
                sub.push_back(TlPhase{{}, green_s, yellow_s});
                it = sub.end() - 1;
            }
            it->green.push_back(c);
        }
        for (auto& ph : sub) {
            std::sort(ph.green.begin(), ph.green.end());
            p.phases.push_back(std::move(ph));
        }
    }
    return p;
}

bool program_conflict_free(const TlProgram& p, const NetworkGraph& g) {
    for (const auto& ph : p.phases) {
        for (std::size_t i = 0; i < ph.green.size(); ++i)
            for (std::size_t j = i + 1; j < ph.green.size(); ++j)
                if (conflicts(g, ph.green[i], ph.green[j])) return false;
    }
    return true;
}

double policy_act(const Observation& obs, const PolicyParams& params, PolicyMode mode, RngStream& rng) {
    const double a = mode == PolicyMode::Deterministic ? deterministic_action(params, obs)
                                                       : sample_action(params, obs, rng).action;
    return std::clamp(a, -kActionMax, kActionMax);
}

StepCommands TlController::decide(SimState& state, const NetworkGraph& g, const SimConfig& cfg) {
    StepCommands cmds;
    for (const auto& [id, v] : state.vehicles) {
        if (tl_gate(program_, state.clock, v, g, cfg.idm) == Gate::Hold) cmds.stop_line_holds.insert(id);
    }
    return cmds;
}

StepCommands PolicyController::decide(SimState& state, const NetworkGraph& g, const SimConfig& cfg) {
    StepCommands cmds;
    for (const auto& [id, v] : state.vehicles) {
        if (v.kind != VehicleKind::RV || !in_control_zone(v, g, cfg)) continue;
        cmds.rv_accels[id] = policy_act(observe(state, id, g, obs_), *params_, mode_, state.policy_rng);
    }
    return cmds;
}

}  // namespace mixflow
