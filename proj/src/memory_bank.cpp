#include "nncalc/memory_bank.hpp"

#include <algorithm>

#include "nncalc/errors.hpp"

namespace nncalc {
namespace {

std::optional<MemorySlot>& register_of(CalculatorSession& s, RegisterKind kind) {
    return kind == RegisterKind::dataset ? s.data_register : s.nn_register;
}

MemorySlot& filled_register(CalculatorSession& s, RegisterKind kind) {
    auto& reg = register_of(s, kind);
    if (!reg) throw EmptyRegister(std::string(to_string(kind)) + " register is empty");
    return *reg;
}

const Dataset& current_dataset(const CalculatorSession& s) {
    if (!s.current_dataset) throw ValidationError("current_dataset", "no dataset selected");
    return *s.current_dataset;
}

const Network& current_network(const CalculatorSession& s) {
    if (!s.current_network) throw ValidationError("current_network", "no network present");
    return *s.current_network;
}

void remove_matches(std::vector<LabeledPoint>& from, const std::vector<LabeledPoint>& remove) {
    for (const LabeledPoint& p : remove) {
        const auto it = std::find(from.rbegin(), from.rend(), p);
        if (it != from.rend()) from.erase(std::next(it).base());
    }
}

void log(CalculatorSession& s, MemoryOp op, RegisterKind kind, const std::string& extra = {}) {
    std::string entry = std::string(to_string(kind)) + " " + std::string(to_string(op));
    if (!extra.empty()) entry += " " + extra;
    s.history.push_back(std::move(entry));
}

}  // namespace

std::string_view to_string(RegisterKind kind) { return kind == RegisterKind::dataset ? "d" : "nn"; }

RegisterKind parse_register(std::string_view text) {
    if (text == "d") return RegisterKind::dataset;
    if (text == "nn") return RegisterKind::network;
    throw ValidationError("register", "expected d or nn");
}

std::string_view to_string(MemoryOp op) {
    switch (op) {
        case MemoryOp::ms: return "ms";
        case MemoryOp::mr: return "mr";
        case MemoryOp::mc: return "mc";
        case MemoryOp::m_plus: return "m_plus";
        case MemoryOp::m_minus: return "m_minus";
    }
    return "ms";
}

MemoryOp parse_memory_op(std::string_view text) {
    for (MemoryOp op : {MemoryOp::ms, MemoryOp::mr, MemoryOp::mc, MemoryOp::m_plus, MemoryOp::m_minus}) {
        if (to_string(op) == text) return op;
    }
    throw ValidationError("op", "unknown memory operation '" + std::string(text) + "'");
}

CalculatorSession ms(CalculatorSession s, RegisterKind kind, const std::string& label) {
    if (kind == RegisterKind::dataset) {
        s.data_register = MemorySlot{kind, current_dataset(s), label};
    } else {
        s.nn_register = MemorySlot{kind, current_network(s), label};
        if (!label.empty()) s.stored_models[label] = *s.current_network;
    }
    log(s, MemoryOp::ms, kind, label);
    return s;
}

CalculatorSession mr(CalculatorSession s, RegisterKind kind) {
    const MemorySlot& slot = filled_register(s, kind);
    if (kind == RegisterKind::dataset) {
        s.current_dataset = std::get<Dataset>(slot.payload);
    } else {
        s.current_network = std::get<Network>(slot.payload);
    }
    log(s, MemoryOp::mr, kind);
    return s;
}

CalculatorSession mc(CalculatorSession s, RegisterKind kind) {
    register_of(s, kind).reset();
    log(s, MemoryOp::mc, kind);
    return s;
}

CalculatorSession m_plus(CalculatorSession s, RegisterKind kind) {
    MemorySlot& slot = filled_register(s, kind);
    std::string note;
    if (kind == RegisterKind::dataset) {
        const Dataset& cur = current_dataset(s);
        auto& stored = std::get<Dataset>(slot.payload);
        if (!(cur.spec == stored.spec)) {
            note = "from " + std::string(to_string(cur.spec.pattern)) + " seed " + std::to_string(cur.spec.seed);
        }
        stored.train.insert(stored.train.end(), cur.train.begin(), cur.train.end());
        stored.test.insert(stored.test.end(), cur.test.begin(), cur.test.end());
    } else {
        auto& stored = std::get<Network>(slot.payload);
        stored = combine(stored, current_network(s), 1.0);
    }
    log(s, MemoryOp::m_plus, kind, note);
    return s;
}

CalculatorSession m_minus(CalculatorSession s, RegisterKind kind) {
    MemorySlot& slot = filled_register(s, kind);
    if (kind == RegisterKind::dataset) {
        const Dataset& cur = current_dataset(s);
        auto& stored = std::get<Dataset>(slot.payload);
        remove_matches(stored.train, cur.train);
        remove_matches(stored.test, cur.test);
    } else {
        auto& stored = std::get<Network>(slot.payload);
        stored = combine(stored, current_network(s), -1.0);
    }
    log(s, MemoryOp::m_minus, kind);
    return s;
}

CalculatorSession apply(CalculatorSession s, RegisterKind kind, MemoryOp op, const std::string& label) {
    switch (op) {
        case MemoryOp::ms: return ms(std::move(s), kind, label);
        case MemoryOp::mr: return mr(std::move(s), kind);
        case MemoryOp::mc: return mc(std::move(s), kind);
        case MemoryOp::m_plus: return m_plus(std::move(s), kind);
        case MemoryOp::m_minus: return m_minus(std::move(s), kind);
    }
    return s;
}

}  // namespace nncalc
