#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lorasim::firmware {

/// A firmware module could not be loaded. `symbol()` is set when a specific symbol is at fault.
class FirmwareLoadError : public std::runtime_error {
 public:
  FirmwareLoadError(const std::string& what, std::string symbol = {})
      : std::runtime_error(what), symbol_(std::move(symbol)) {}
  const std::string& symbol() const { return symbol_; }

 private:
  std::string symbol_;
};

struct ModuleSymbols {
  std::vector<std::string> imports;  // undefined, non-weak dynamic symbols
  std::vector<std::string> exports;  // defined global functions and objects
};

/// Reads the dynamic symbol table of a shared object built for the host.
ModuleSymbols read_dynamic_symbols(const std::filesystem::path& path);

}  // namespace lorasim::firmware
