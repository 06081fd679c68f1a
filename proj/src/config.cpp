#include "dctdrift/config.h"

#include "dctdrift/error.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dctdrift {

namespace {

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are parsed as size_t");

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& where)
{
    T value{};
    const char* first = s.data();
    const char* last = first + s.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (s.empty() || res.ec != std::errc() || res.ptr != last) {
        throw InvalidParameter(fmt::format("{}: expected a number, got \"{}\"", where, s));
    }
    return value;
}

template <class T>
T parse_value(const std::string& s, const std::string& where);

template <>
std::size_t parse_value<std::size_t>(const std::string& s, const std::string& where)
{
    if (!s.empty() && s.front() == '-') throw InvalidParameter(where + ": must be non-negative");
    return parse_number<std::size_t>(s, where);
}

template <>
double parse_value<double>(const std::string& s, const std::string& where)
{
    return parse_number<double>(s, where);
}

template <>
bool parse_value<bool>(const std::string& s, const std::string& where)
{
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InvalidParameter(fmt::format("{}: expected true or false, got \"{}\"", where, s));
}

template <>
Interval parse_value<Interval>(const std::string& s, const std::string& where)
{
    const auto parts = split_list(s);
    if (parts.size() == 1) {
        const double v = parse_number<double>(parts[0], where);
        return {v, v};
    }
    if (parts.size() != 2) throw InvalidParameter(where + ": expected \"lo, hi\"");
    return {parse_number<double>(parts[0], where), parse_number<double>(parts[1], where)};
}

template <>
IntRange parse_value<IntRange>(const std::string& s, const std::string& where)
{
    const auto parts = split_list(s);
    if (parts.size() == 1) {
        const int v = parse_number<int>(parts[0], where);
        return {v, v};
    }
    if (parts.size() != 2) throw InvalidParameter(where + ": expected \"lo, hi\"");
    return {parse_number<int>(parts[0], where), parse_number<int>(parts[1], where)};
}

template <>
std::vector<std::size_t> parse_value<std::vector<std::size_t>>(const std::string& s, const std::string& where)
{
    std::vector<std::size_t> out;
    if (trim(s).empty()) return out;
    for (const auto& p : split_list(s)) out.push_back(parse_value<std::size_t>(p, where));
    return out;
}

template <>
DriftSource parse_value<DriftSource>(const std::string& s, const std::string& where)
{
    if (s == "gp" || s == "gaussian_process") return DriftSource::gaussian_process;
    if (s == "exponential") return DriftSource::exponential;
    throw InvalidParameter(fmt::format("{}: expected gp or exponential, got \"{}\"", where, s));
}

template <>
std::vector<Interval> parse_value<std::vector<Interval>>(const std::string& s, const std::string& where)
{
    std::vector<Interval> out;
    if (trim(s).empty()) return out;
    for (const auto& item : split_list(s)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw InvalidParameter(fmt::format("{}: expected start:end, got \"{}\"", where, item));
        Interval iv{parse_number<double>(trim(item.substr(0, colon)), where),
                    parse_number<double>(trim(item.substr(colon + 1)), where)};
        if (!(iv.lo <= iv.hi)) throw InvalidParameter(fmt::format("{}: interval \"{}\" ends before it starts", where, item));
        out.push_back(iv);
    }
    return out;
}

template <>
std::filesystem::path parse_value<std::filesystem::path>(const std::string& s, const std::string& where)
{
    if (s.empty()) throw InvalidParameter(where + ": path must not be empty");
    return std::filesystem::path(s);
}

std::string format_value(std::size_t v) { return fmt::format("{}", v); }
std::string format_value(double v) { return fmt::format("{}", v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(const Interval& v) { return fmt::format("{}, {}", v.lo, v.hi); }
std::string format_value(const IntRange& v) { return fmt::format("{}, {}", v.lo, v.hi); }
std::string format_value(const std::vector<std::size_t>& v) { return fmt::format("{}", fmt::join(v, ", ")); }
std::string format_value(const std::vector<Interval>& v)
{
    std::vector<std::string> items;
    for (const auto& iv : v) items.push_back(fmt::format("{}:{}", iv.lo, iv.hi));
    return fmt::format("{}", fmt::join(items, ", "));
}
std::string format_value(const std::filesystem::path& v) { return v.string(); }
std::string format_value(DriftSource v) { return v == DriftSource::gaussian_process ? "gp" : "exponential"; }

struct Key {
    std::function<void(Config&, const std::string&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

using Section = std::vector<std::pair<std::string, Key>>;

template <class S, class T>
std::pair<std::string, Key> key(std::string name, S Config::*section, T S::*field)
{
    Key k;
    k.set = [section, field](Config& c, const std::string& value, const std::string& where) {
        c.*section.*field = parse_value<T>(value, where);
    };
    k.get = [section, field](const Config& c) { return format_value(c.*section.*field); };
    return {std::move(name), std::move(k)};
}

template <class T>
std::pair<std::string, Key> top_key(std::string name, T Config::*field)
{
    Key k;
    k.set = [field](Config& c, const std::string& value, const std::string& where) {
        c.*field = parse_value<T>(value, where);
    };
    k.get = [field](const Config& c) { return format_value(c.*field); };
    return {std::move(name), std::move(k)};
}

const std::vector<std::pair<std::string, Section>>& schema()
{
    using C = Config;
    static const std::vector<std::pair<std::string, Section>> s{
        {"dataset",
         {
             key("count", &C::dataset, &DatasetSpec::count),
             key("val_fraction", &C::dataset, &DatasetSpec::val_fraction),
             key("length", &C::dataset, &DatasetSpec::length),
             key("period", &C::dataset, &DatasetSpec::period),
             key("seed", &C::dataset, &DatasetSpec::seed),
             key("drift_source", &C::dataset, &DatasetSpec::drift_source),
             key("exposure_count", &C::dataset, &DatasetSpec::exposure_count),
             key("exposure_duration", &C::dataset, &DatasetSpec::exposure_duration),
             key("response_beta", &C::dataset, &DatasetSpec::response_beta),
             key("response_tau", &C::dataset, &DatasetSpec::response_tau),
             key("exposure_gap", &C::dataset, &DatasetSpec::exposure_gap),
             key("tail_margin", &C::dataset, &DatasetSpec::tail_margin),
             key("noise_sigma", &C::dataset, &DatasetSpec::noise_sigma),
             key("gp_alpha", &C::dataset, &DatasetSpec::gp_alpha),
             key("gp_mean", &C::dataset, &DatasetSpec::gp_mean),
             key("gp_jitter", &C::dataset, &DatasetSpec::gp_jitter),
             key("drift_r0", &C::dataset, &DatasetSpec::drift_r0),
             key("drift_rf", &C::dataset, &DatasetSpec::drift_rf),
             key("drift_rs", &C::dataset, &DatasetSpec::drift_rs),
             key("drift_tau_f", &C::dataset, &DatasetSpec::drift_tau_f),
             key("drift_tau_s", &C::dataset, &DatasetSpec::drift_tau_s),
             key("eps_fraction", &C::dataset, &DatasetSpec::eps_fraction),
         }},
        {"model",
         {
             key("initial_kernel", &C::model, &ModelSpec::initial_kernel),
             key("block_dilations", &C::model, &ModelSpec::block_dilations),
             key("channels", &C::model, &ModelSpec::channels),
             key("dropout_rate", &C::model, &ModelSpec::dropout_rate),
             key("dct_window", &C::model, &ModelSpec::dct_window),
             key("dilated_kernel", &C::model, &ModelSpec::dilated_kernel),
         }},
        {"train",
         {
             key("epochs", &C::train, &TrainConfig::epochs),
             key("batch_size", &C::train, &TrainConfig::batch_size),
             key("lr", &C::train, &TrainConfig::lr),
             key("beta1", &C::train, &TrainConfig::beta1),
             key("beta2", &C::train, &TrainConfig::beta2),
             key("adam_eps", &C::train, &TrainConfig::adam_eps),
             key("tv_lambda", &C::train, &TrainConfig::tv_lambda),
             key("seed", &C::train, &TrainConfig::seed),
         }},
        {"pg",
         {
             key("bandwidth", &C::pg, &PgConfig::bandwidth_bins),
             top_key("bandwidths", &C::pg_bandwidths),
             top_key("exposures", &C::pg_exposures),
             key("pad_length", &C::pg, &PgConfig::pad_length),
             key("max_iters", &C::pg, &PgConfig::max_iters),
             key("tol", &C::pg, &PgConfig::tol),
         }},
        {"eval",
         {
             key("normalized_metrics", &C::eval, &EvalConfig::normalized_metrics),
             key("overlays", &C::eval, &EvalConfig::overlays),
         }},
        {"paths",
         {
             key("dataset", &C::paths, &PathsConfig::dataset),
             key("checkpoint", &C::paths, &PathsConfig::checkpoint),
             key("out", &C::paths, &PathsConfig::out),
         }},
    };
    return s;
}

} // namespace

void Config::validate() const
{
    dataset.validate();
    model.validate();
    train.validate();
    pg.validate();
    if (pg_bandwidths.empty()) throw InvalidParameter("[pg] bandwidths must not be empty");
    for (std::size_t b : pg_bandwidths) {
        PgConfig c = pg;
        c.bandwidth_bins = b;
        c.validate();
    }
    if (pg.pad_length < dataset.length) throw InvalidParameter("[pg] pad_length must be >= [dataset] length");
}

Config parse_config(const std::string& text, const std::string& source)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(fmt::format("{}:{}: {}", source, e.line(), e.message()), e.line());
    }

    Config cfg;
    const auto& sch = schema();
    for (const auto& [section_name, section] : tree) {
        auto sit = std::find_if(sch.begin(), sch.end(), [&](const auto& s) { return s.first == section_name; });
        if (sit == sch.end()) {
            if (section.empty()) {
                throw InvalidParameter(fmt::format("{}: key \"{}\" must be inside a section", source, section_name));
            }
            throw InvalidParameter(fmt::format("{}: unknown section [{}]", source, section_name));
        }
        for (const auto& [key_name, node] : section) {
            const auto& keys = sit->second;
            auto kit = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return k.first == key_name; });
            if (kit == keys.end()) {
                throw InvalidParameter(fmt::format("{}: unknown key \"{}\" in [{}]", source, key_name, section_name));
            }
            kit->second.set(cfg, trim(node.data()), fmt::format("{}: [{}] {}", source, section_name, key_name));
        }
    }
    cfg.validate();
    return cfg;
}

Config load_config(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string format_config(const Config& cfg)
{
    std::string out;
    for (const auto& [section_name, section] : schema()) {
        if (!out.empty()) out += '\n';
        out += fmt::format("[{}]\n", section_name);
        for (const auto& [key_name, k] : section) out += fmt::format("{} = {}\n", key_name, k.get(cfg));
    }
    return out;
}

} // namespace dctdrift
