#include "nbmc/experiment.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace nbmc {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> to_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> to_int(std::string_view s) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::size_t common_prefix(std::string_view a, std::string_view b) {
    std::size_t n = 0;
    while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
    return n;
}

// Prefers a long shared prefix ("taus" -> "tau_grid"), then edit distance.
std::string suggest(std::string_view key, const std::vector<std::string>& known) {
    const std::string* best = nullptr;
    std::size_t best_prefix = 0, best_dist = 0;
    for (const auto& k : known) {
        const std::size_t p = common_prefix(key, k);
        const std::size_t d = edit_distance(key, k);
        const bool better = !best || (std::min<std::size_t>(p, 3) > std::min<std::size_t>(best_prefix, 3)) ||
                            (std::min<std::size_t>(p, 3) == std::min<std::size_t>(best_prefix, 3) && d < best_dist);
        if (better) {
            best = &k;
            best_prefix = p;
            best_dist = d;
        }
    }
    if (!best || (best_prefix < 2 && best_dist > 3)) return {};
    return *best;
}

struct Setting {
    std::string value;
    int line = 0;
};

using Handler = std::function<void(ExperimentPlan&, const Setting&, std::vector<std::string>&)>;

struct KeySpec {
    Handler apply;
};

std::string where(const std::string& section, const std::string& key, int line) {
    return fmt::format("line {}: [{}] {}", line, section, key);
}

template <class T>
Handler number_field(T SolverDefaults::*field) {
    return [field](ExperimentPlan& plan, const Setting& s, std::vector<std::string>& errs) {
        if constexpr (std::is_same_v<T, int>) {
            if (auto v = to_int<int>(s.value)) plan.solver.*field = *v;
            else errs.push_back(fmt::format("expected an integer, got '{}'", s.value));
        } else {
            if (auto v = to_double(s.value)) plan.solver.*field = *v;
            else errs.push_back(fmt::format("expected a number, got '{}'", s.value));
        }
    };
}

Handler optional_number(std::optional<double> SolverDefaults::*field) {
    return [field](ExperimentPlan& plan, const Setting& s, std::vector<std::string>& errs) {
        if (s.value.empty()) return;
        if (auto v = to_double(s.value)) plan.solver.*field = *v;
        else errs.push_back(fmt::format("expected a number, got '{}'", s.value));
    };
}

bool parse_bool(std::string_view v, bool& out) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return out = true, true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return out = false, true;
    return false;
}

// "10:10:310" (inclusive) or "10, 20, 40".
std::optional<std::vector<double>> parse_grid(std::string_view text) {
    std::vector<double> out;
    if (text.find(':') != std::string_view::npos) {
        const auto a = text.find(':');
        const auto b = text.find(':', a + 1);
        if (b == std::string_view::npos) return std::nullopt;
        auto start = to_double(trim(text.substr(0, a)));
        auto step = to_double(trim(text.substr(a + 1, b - a - 1)));
        auto stop = to_double(trim(text.substr(b + 1)));
        if (!start || !step || !stop || !(*step > 0.0) || *stop < *start) return std::nullopt;
        const auto n = static_cast<long>(std::floor((*stop - *start) / *step + 1e-9));
        for (long i = 0; i <= n; ++i) out.push_back(*start + static_cast<double>(i) * *step);
        return out;
    }
    for (auto item : split_list(text)) {
        auto v = to_double(item);
        if (!v) return std::nullopt;
        out.push_back(*v);
    }
    return out;
}

std::map<std::string, std::map<std::string, KeySpec>> schema(const std::filesystem::path& base_dir) {
    auto resolve = [base_dir](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    std::map<std::string, std::map<std::string, KeySpec>> s;
    auto& data = s["data"];
    data["source"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (v.value == "synthetic") plan.data.kind = DataSource::Kind::synthetic;
        else if (v.value == "csv") plan.data.kind = DataSource::Kind::csv;
        else if (v.value == "pgm") plan.data.kind = DataSource::Kind::pgm;
        else errs.push_back(fmt::format("expected synthetic, csv or pgm, got '{}'", v.value));
    }};
    data["path"] = {[resolve](ExperimentPlan& plan, const Setting& v, std::vector<std::string>&) {
        plan.data.path = resolve(v.value);
    }};
    auto data_index = [](Index DataSource::*field) {
        return KeySpec{[field](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
            if (auto n = to_int<Index>(v.value); n && *n > 0) plan.data.*field = *n;
            else errs.push_back(fmt::format("expected a positive integer, got '{}'", v.value));
        }};
    };
    data["rows"] = data_index(&DataSource::rows);
    data["cols"] = data_index(&DataSource::cols);
    data["rank"] = data_index(&DataSource::rank);
    data["patch_size"] = data_index(&DataSource::patch_size);
    auto data_double = [](double DataSource::*field) {
        return KeySpec{[field](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
            if (auto n = to_double(v.value)) plan.data.*field = *n;
            else errs.push_back(fmt::format("expected a number, got '{}'", v.value));
        }};
    };
    data["min_value"] = data_double(&DataSource::min_value);
    data["max_value"] = data_double(&DataSource::max_value);
    data["truncate_rank"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (v.value.empty()) return;
        if (auto n = to_int<Index>(v.value); n && *n > 0) plan.data.truncate_rank = *n;
        else errs.push_back(fmt::format("expected a positive integer, got '{}'", v.value));
    }};

    auto& exp = s["experiment"];
    exp["noise"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        plan.noise_list.clear();
        for (auto item : split_list(v.value)) {
            try {
                plan.noise_list.push_back(parse_noise_family(item));
            } catch (const std::exception& ex) {
                errs.push_back(ex.what());
            }
        }
    }};
    exp["q"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        plan.q_list.clear();
        for (auto item : split_list(v.value)) {
            if (auto q = to_double(item)) plan.q_list.push_back(*q);
            else errs.push_back(fmt::format("expected a number, got '{}'", item));
        }
    }};
    exp["models"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        plan.models.clear();
        for (auto item : split_list(v.value)) {
            try {
                plan.models.push_back(ModelSpec::parse(item));
            } catch (const std::exception& ex) {
                errs.push_back(ex.what());
            }
        }
    }};
    exp["trials"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (v.value.empty()) return;
        if (auto n = to_int<int>(v.value)) plan.trials = *n;
        else errs.push_back(fmt::format("expected an integer, got '{}'", v.value));
    }};
    exp["master_seed"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (auto n = to_int<std::uint64_t>(v.value)) plan.master_seed = *n;
        else errs.push_back(fmt::format("expected an unsigned 64-bit integer, got '{}'", v.value));
    }};
    exp["threads"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (auto n = to_int<int>(v.value)) plan.threads = *n;
        else errs.push_back(fmt::format("expected an integer, got '{}'", v.value));
    }};
    exp["output_dir"] = {[resolve](ExperimentPlan& plan, const Setting& v, std::vector<std::string>&) {
        plan.output_dir = resolve(v.value);
    }};
    exp["heatmaps"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (!parse_bool(v.value, plan.heatmaps)) errs.push_back(fmt::format("expected true/false, got '{}'", v.value));
    }};
    exp["trace"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (!parse_bool(v.value, plan.trace)) errs.push_back(fmt::format("expected true/false, got '{}'", v.value));
    }};

    auto& solver = s["solver"];
    solver["tau_grid"] = {[](ExperimentPlan& plan, const Setting& v, std::vector<std::string>& errs) {
        if (v.value.empty()) return;
        if (auto g = parse_grid(v.value)) plan.tau_grid = *g;
        else errs.push_back(fmt::format("expected start:step:stop or a comma list, got '{}'", v.value));
    }};
    solver["max_iters"] = {number_field(&SolverDefaults::max_iters)};
    solver["tol"] = {number_field(&SolverDefaults::tol)};
    solver["eta"] = {number_field(&SolverDefaults::eta)};
    solver["t0"] = {number_field(&SolverDefaults::t0)};
    solver["alpha"] = {optional_number(&SolverDefaults::alpha)};
    solver["beta"] = {optional_number(&SolverDefaults::beta)};
    return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(fmt::format("invalid experiment config:\n  {}", fmt::join(problems, "\n  "))),
      problems_(std::move(problems)) {}

ExperimentPlan parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
    const auto keys = schema(base_dir);
    std::vector<std::string> known_keys;
    for (const auto& [section, entries] : keys)
        for (const auto& [key, spec] : entries) known_keys.push_back(key);

    ExperimentPlan plan;
    std::vector<std::string> problems;
    std::map<std::string, std::map<std::string, Setting>> seen;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                problems.push_back(fmt::format("line {}: unterminated section header '{}'", line_no, line));
                continue;
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!keys.contains(section)) {
                problems.push_back(fmt::format("line {}: unknown section [{}] (expected data, experiment or solver)",
                                               line_no, section));
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back(fmt::format("line {}: expected key = value, got '{}'", line_no, line));
            continue;
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (section.empty()) {
            problems.push_back(fmt::format("line {}: '{}' appears before any [section]", line_no, key));
            continue;
        }
        const auto sec = keys.find(section);
        if (sec == keys.end()) continue;
        if (!sec->second.contains(key)) {
            const std::string hint = suggest(key, known_keys);
            problems.push_back(hint.empty() ? fmt::format("line {}: unknown key '{}' in [{}]", line_no, key, section)
                                            : fmt::format("line {}: unknown key '{}' in [{}] (did you mean '{}'?)",
                                                          line_no, key, section, hint));
            continue;
        }
        seen[section][key] = {value, line_no};
    }

    for (const auto& [sec_name, entries] : seen) {
        for (const auto& [key, setting] : entries) {
            std::vector<std::string> errs;
            keys.at(sec_name).at(key).apply(plan, setting, errs);
            for (auto& e : errs) problems.push_back(fmt::format("{}: {}", where(sec_name, key, setting.line), e));
        }
    }

    auto has = [&](const char* sec, const char* key) { return seen.contains(sec) && seen.at(sec).contains(key); };
    if (!has("data", "source")) problems.push_back("missing required key [data] source");
    if (!has("experiment", "noise")) problems.push_back("missing required key [experiment] noise");
    if (!has("experiment", "q")) problems.push_back("missing required key [experiment] q");
    if (!has("experiment", "models")) problems.push_back("missing required key [experiment] models");
    if (has("data", "source") && plan.data.kind != DataSource::Kind::synthetic && !has("data", "path")) {
        problems.push_back("[data] path is required for csv and pgm sources");
    }

    if (const char* env = std::getenv("NBMC_SEED"); env && *env) {
        if (auto s = to_int<std::uint64_t>(trim(env))) plan.master_seed = *s;
        else problems.push_back(fmt::format("NBMC_SEED='{}' is not an unsigned 64-bit integer", env));
    }

    // Range checks run even after parse errors. Empty lists are already
    // reported as missing or malformed keys in that case.
    const bool parse_failed = !problems.empty();
    try {
        plan.validate();
    } catch (const ConfigError& ex) {
        for (const auto& p : ex.problems())
            if (!parse_failed || !p.ends_with(" is empty")) problems.push_back(p);
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return plan;
}

ExperimentPlan parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({fmt::format("cannot open config '{}'", path.string())});
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.parent_path());
}

}  // namespace nbmc
