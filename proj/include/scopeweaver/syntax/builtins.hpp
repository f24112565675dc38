#pragma once

#include <string_view>

namespace scopeweaver::syntax {

/// Version label of the builtin name table (corpus language 3.11 builtins
/// plus implicit module attributes such as __file__).
inline constexpr std::string_view kBuiltinTableVersion = "cpython-3.11/1";

bool is_builtin_name(std::string_view name) noexcept;

} // namespace scopeweaver::syntax
