#include "rcmk/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace rcmk {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

Config Config::parse(std::string_view text) {
    Config c;
    std::istringstream is{std::string(text)};
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            if (!c.data_.count(section)) {
                c.order_.push_back(section);
                c.data_[section];
            }
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        c.set(section, key, value);
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
}

std::string Config::emit() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < order_.size(); ++i) {
        if (i) os << "\n";
        const Section& s = data_.at(order_[i]);
        os << "[" << order_[i] << "]\n";
        for (const std::string& key : s.order)
            os << key << " = " << s.values.at(key) << "\n";
    }
    return os.str();
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    return it != data_.end() && it->second.values.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    if (it == data_.end() || !it->second.values.count(key))
        throw ConfigError("missing config value " + section + "." + key);
    return it->second.values.at(key);
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           std::string fallback) const {
    return has(section, key) ? get(section, key) : std::move(fallback);
}

std::int64_t Config::get_int(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
        std::size_t pos = 0;
        std::int64_t out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(section + "." + key + " is not an integer: '" + v + "'");
    }
}

std::int64_t Config::get_int_or(const std::string& section, const std::string& key,
                                std::int64_t fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
        // allow p/q ratios for pixel budgets like 8/255
        auto slash = v.find('/');
        std::size_t pos = 0;
        if (slash != std::string::npos) {
            double num = std::stod(v.substr(0, slash), &pos);
            if (pos != slash) throw std::invalid_argument(v);
            double den = std::stod(v.substr(slash + 1), &pos);
            if (pos != v.size() - slash - 1 || den == 0.0) throw std::invalid_argument(v);
            return num / den;
        }
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(section + "." + key + " is not a number: '" + v + "'");
    }
}

double Config::get_double_or(const std::string& section, const std::string& key,
                             double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

bool Config::get_bool_or(const std::string& section, const std::string& key,
                         bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(section + "." + key + " is not a boolean: '" + v + "'");
}

std::vector<std::int64_t> Config::get_int_list_or(const std::string& section,
                                                  const std::string& key,
                                                  std::vector<std::int64_t> fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    std::vector<std::int64_t> out;
    std::istringstream is(v);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            std::size_t pos = 0;
            std::int64_t n = std::stoll(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            out.push_back(n);
        } catch (const std::exception&) {
            throw ConfigError(section + "." + key + " has a non-integer entry: '" + tok + "'");
        }
    }
    return out;
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
    if (!data_.count(section)) {
        order_.push_back(section);
        data_[section];
    }
    Section& s = data_[section];
    if (!s.values.count(key)) s.order.push_back(key);
    s.values[key] = std::move(value);
}

void Config::set_from_arg(const std::string& arg) {
    auto eq = arg.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects section.key=value, got '" + arg + "'");
    std::string path = trim(arg.substr(0, eq));
    std::string value = trim(arg.substr(eq + 1));
    auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot == path.size() - 1)
        throw ConfigError("--set expects section.key=value, got '" + arg + "'");
    set(path.substr(0, dot), path.substr(dot + 1), value);
}

std::vector<std::string> Config::keys(const std::string& section) const {
    auto it = data_.find(section);
    if (it == data_.end()) return {};
    return it->second.order;
}

ModelSpec model_spec_from_config(const Config& c) {
    ModelSpec spec;
    spec.widths = c.get_int_list_or("model", "widths", spec.widths);
    spec.blocks_per_stage = c.get_int_or("model", "blocks_per_stage", spec.blocks_per_stage);
    spec.variant = variant_from_string(c.get_or("model", "variant", "MK"));
    spec.num_classes = c.get_int_or("model", "num_classes", spec.num_classes);
    spec.in_channels = c.get_int_or("model", "in_channels", spec.in_channels);
    spec.in_h = c.get_int_or("model", "in_h", spec.in_h);
    spec.in_w = c.get_int_or("model", "in_w", spec.in_w);
    spec.skip_connections = c.get_bool_or("model", "skip_connections", spec.skip_connections);
    spec.k = c.get_int_or("model", "k", spec.k);
    spec.a = c.get_int_or("model", "a", spec.a);
    spec.tau = c.get_double_or("model", "tau", spec.tau);
    return spec;
}

TrainConfig train_config_from_config(const Config& c) {
    TrainConfig t;
    t.epochs = static_cast<int>(c.get_int_or("train", "epochs", t.epochs));
    t.batch_size = c.get_int_or("train", "batch_size", t.batch_size);
    t.lr = c.get_double_or("train", "lr", t.lr);
    t.momentum = c.get_double_or("train", "momentum", t.momentum);
    t.weight_decay = c.get_double_or("train", "weight_decay", t.weight_decay);
    for (std::int64_t e : c.get_int_list_or("train", "lr_drop_epochs", {}))
        t.lr_drop_epochs.push_back(static_cast<int>(e));
    t.lr_drop_factor = c.get_double_or("train", "lr_drop_factor", t.lr_drop_factor);
    t.seed = static_cast<std::uint64_t>(c.get_int_or("train", "seed", 0));
    t.shuffle = c.get_bool_or("train", "shuffle", t.shuffle);
    t.hflip = c.get_bool_or("train", "hflip", t.hflip);
    t.crop_pad = c.get_int_or("train", "crop_pad", t.crop_pad);
    return t;
}

AttackSpec attack_spec_from_config(const Config& c) {
    AttackSpec a;
    a.kind = attack_from_string(c.get_or("attack", "kind", "pgd"));
    a.epsilon = c.get_double_or("attack", "epsilon", a.epsilon);
    if (c.has("attack", "step_size"))
        a.step_size = c.get_double("attack", "step_size");
    else if (a.kind == AttackKind::FFGSM)
        a.step_size = ffgsm_default_step(a.epsilon);
    a.num_steps = static_cast<int>(c.get_int_or("attack", "num_steps", a.num_steps));
    a.random_start = c.get_bool_or("attack", "random_start", a.random_start);
    a.seed = static_cast<std::uint64_t>(c.get_int_or("attack", "seed", 0));
    return a;
}

Config default_config() {
    Config c;
    c.set("model", "variant", "MK");
    c.set("model", "widths", "8,16,32");
    c.set("model", "blocks_per_stage", "1");
    c.set("model", "k", "3");
    c.set("model", "a", "1");
    c.set("model", "tau", "0.0001");
    c.set("model", "skip_connections", "true");
    c.set("data", "dataset", "synth");
    c.set("data", "dir", "");
    c.set("data", "limit", "0");
    c.set("train", "epochs", "5");
    c.set("train", "batch_size", "64");
    c.set("train", "lr", "0.05");
    c.set("train", "momentum", "0.9");
    c.set("train", "weight_decay", "0.0002");
    c.set("train", "seed", "0");
    c.set("train", "shuffle", "true");
    c.set("attack", "kind", "pgd");
    c.set("attack", "epsilon", "8/255");
    c.set("attack", "step_size", "2/255");
    c.set("attack", "num_steps", "10");
    c.set("attack", "random_start", "false");
    c.set("attack", "seed", "0");
    c.set("corruption", "severities", "1,2,3,4,5");
    c.set("corruption", "seed", "0");
    c.set("eval", "batch_size", "256");
    return c;
}

}  // namespace rcmk
