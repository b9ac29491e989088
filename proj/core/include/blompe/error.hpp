#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace blompe {

enum class Errc {
  dimension,
  decomposition,
  invalid_partition,
  unsupported_degree,
  insufficient_data,
  component_collapse,
  fit_failure,
  domain,
  precondition,
  bounds_violation,
  insufficient_table,
  scenario,
  input,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

// Non-fatal diagnostics (Y outside the unit box, skipped fits, ...) go
// through a replaceable sink. The default writes "warning: ..." to stderr.
using WarningSink = std::function<void(std::string_view)>;
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace blompe
