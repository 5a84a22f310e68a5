#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltlrl {

// A letter of the alphabet 2^AP, encoded as a bitmask over an AtomTable.
using Symbol = std::uint32_t;

inline constexpr std::size_t kMaxAtoms = 16;

// Ordered set of atomic proposition names. Bit i of a Symbol refers to names()[i].
class AtomTable {
 public:
  AtomTable() = default;
  explicit AtomTable(std::vector<std::string> names);
  AtomTable(std::initializer_list<std::string> names) : AtomTable(std::vector<std::string>(names)) {}

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  // Bit for a single atom; throws UnknownAtomError.
  Symbol bit(std::string_view name) const;
  // Symbol holding exactly the given atoms.
  Symbol symbol(std::initializer_list<std::string_view> atoms) const;
  Symbol symbol(const std::vector<std::string>& atoms) const;

  // Number of letters in 2^AP.
  std::size_t alphabet_size() const noexcept { return std::size_t{1} << names_.size(); }

  // "{r1,obs}" style rendering.
  std::string to_string(Symbol s) const;

  bool operator==(const AtomTable&) const = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace ltlrl
