#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nncalc/dataset.hpp"
#include "nncalc/mlp.hpp"

namespace nncalc {

enum class RegisterKind { dataset, network };
enum class MemoryOp { ms, mr, mc, m_plus, m_minus };

std::string_view to_string(RegisterKind kind);  // "d" / "nn"
RegisterKind parse_register(std::string_view text);
std::string_view to_string(MemoryOp op);
MemoryOp parse_memory_op(std::string_view text);

struct MemorySlot {
    RegisterKind kind = RegisterKind::dataset;
    std::variant<Dataset, Network> payload;
    std::string label;

    bool operator==(const MemorySlot&) const = default;
};

// Calculator state: the working dataset and network, one memory register per
// kind (MC/MR/MS/M+/M-), labeled model snapshots, and an append-only log.
struct CalculatorSession {
    std::optional<Dataset> current_dataset;
    std::optional<Network> current_network;
    std::optional<MemorySlot> data_register;
    std::optional<MemorySlot> nn_register;
    std::map<std::string, Network> stored_models;
    std::vector<std::string> history;

    bool operator==(const CalculatorSession&) const = default;
};

// MS: copy the current object into the register. A non-empty label also
// files a network under stored_models.
CalculatorSession ms(CalculatorSession session, RegisterKind kind, const std::string& label = {});
// MR: replace the current object from the register. Throws EmptyRegister.
CalculatorSession mr(CalculatorSession session, RegisterKind kind);
// MC: empty the register.
CalculatorSession mc(CalculatorSession session, RegisterKind kind);
// M+: networks add coefficients elementwise; datasets append points per split.
CalculatorSession m_plus(CalculatorSession session, RegisterKind kind);
// M-: networks subtract coefficients; datasets remove one exact match
// (coordinates and labels) per current point, latest occurrence first.
CalculatorSession m_minus(CalculatorSession session, RegisterKind kind);

CalculatorSession apply(CalculatorSession session, RegisterKind kind, MemoryOp op, const std::string& label = {});

}  // namespace nncalc
