#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rcmk/model.hpp"
#include "rcmk/robustness.hpp"

namespace rcmk {

// INI-style run configuration: [section] headers, key = value pairs, and
// '#' comments. Values are kept as strings so that parse -> emit -> parse is
// the identity on the map contents.
class Config {
  public:
    static Config parse(std::string_view text);
    static Config load(const std::string& path);

    std::string emit() const;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       std::string fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key) const;
    std::int64_t get_int_or(const std::string& section, const std::string& key,
                            std::int64_t fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<std::int64_t> get_int_list_or(const std::string& section, const std::string& key,
                                              std::vector<std::int64_t> fallback) const;

    void set(const std::string& section, const std::string& key, std::string value);
    // "section.key=value" form used by the CLI --set flag.
    void set_from_arg(const std::string& arg);

    // Sections and keys in first-seen order (emit preserves it).
    const std::vector<std::string>& sections() const { return order_; }
    std::vector<std::string> keys(const std::string& section) const;

  private:
    struct Section {
        std::vector<std::string> order;
        std::map<std::string, std::string> values;
    };
    std::vector<std::string> order_;
    std::map<std::string, Section> data_;
};

// Typed views over the config sections used by the CLI.
ModelSpec model_spec_from_config(const Config& c);
TrainConfig train_config_from_config(const Config& c);
AttackSpec attack_spec_from_config(const Config& c);

Config default_config();

}  // namespace rcmk
