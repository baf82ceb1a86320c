#pragma once

#include <map>
#include <string>
#include <vector>

#include "fnetlab/bench.hpp"
#include "fnetlab/trainer.hpp"

namespace fnetlab {

struct ConfigKey {
  const char* name;
  const char* def;
  const char* help;
};

// Flat key=value run configuration: one `key = value` pair per line,
// '#' comments, unknown keys rejected. Command-line `--key value`
// overrides beat file values; the effective config echoes verbatim.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<ConfigKey>& registry();

  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  void set(const std::string& key, const std::string& value);

  const std::string& str(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<Index> index_list(const std::string& key) const;
  std::vector<std::string> str_list(const std::string& key) const;

  // Effective configuration, every key, registry order.
  std::string echo() const;

  // Assembled module configs. `for_runtime` enforces the constructible
  // checks (radix-2 extents); the analytic flops/params commands skip
  // them and evaluate the published cost forms at any dims.
  ModelConfig model_config(bool for_runtime = true) const;
  TrainConfig train_config() const;
  TaskSpec task_spec() const;
  SweepOptions sweep_options() const;

  static void print_help(std::ostream& os);

 private:
  bool was_set(const std::string& key) const;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace fnetlab
