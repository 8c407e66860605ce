#pragma once

// COMPS: the components that may fail, shared by every layer of the twin.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aitwin {

enum class ComponentKind { Valve, Tank, Pipe, Pump, Sensor };

std::string_view kindName(ComponentKind kind) noexcept;
std::optional<ComponentKind> parseKind(std::string_view name) noexcept;

inline constexpr std::string_view kOkMode = "OK";

struct Component {
  std::string id;
  ComponentKind kind = ComponentKind::Valve;
  /// Always contains "OK".
  std::vector<std::string> modes;

  bool hasMode(std::string_view mode) const;
};

/// Failure modes the shipped process models understand, per component kind.
std::vector<std::string> defaultModes(ComponentKind kind);

/// component id -> active failure mode (never "OK").
using FailureAssignment = std::map<std::string, std::string>;

/// Throws UnknownComponent / UnknownMode / DuplicateId.
void validateComponents(std::span<const Component> comps);
void validateAssignment(const FailureAssignment& fa, std::span<const Component> comps);

}  // namespace aitwin
