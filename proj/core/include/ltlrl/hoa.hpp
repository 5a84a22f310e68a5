#pragma once

#include <string>
#include <string_view>

#include "ltlrl/automaton.hpp"

namespace ltlrl {

// Reads the HOA v1 subset: HOA/States/Start/AP/acc-name/Acceptance headers and a body of
// explicitly labelled edges with state-based Rabin marks. Pair i uses Fin(2i) for B_i and
// Inf(2i+1) for G_i. Throws HoaError.
Dra import_hoa(std::string_view text);

// Writes the same subset; import_hoa(export_hoa(d)) is isomorphic to d.
std::string export_hoa(const Dra& dra, std::string_view name = "ltlrl");

}  // namespace ltlrl
