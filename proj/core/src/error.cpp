#include "blompe/error.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace blompe {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::dimension: return "dimension error";
    case Errc::decomposition: return "decomposition error";
    case Errc::invalid_partition: return "invalid partition";
    case Errc::unsupported_degree: return "unsupported degree";
    case Errc::insufficient_data: return "insufficient data";
    case Errc::component_collapse: return "component collapse";
    case Errc::fit_failure: return "fit failure";
    case Errc::domain: return "domain error";
    case Errc::precondition: return "precondition failure";
    case Errc::bounds_violation: return "bounds violation";
    case Errc::insufficient_table: return "insufficient table";
    case Errc::scenario: return "scenario misconfiguration";
    case Errc::input: return "input error";
  }
  return "unknown error";
}

void fail(Errc code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return s;
}

}  // namespace

WarningSink set_warning_sink(WarningSink next) {
  std::lock_guard lock(sink_mutex());
  return std::exchange(sink(), std::move(next));
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

}  // namespace blompe
