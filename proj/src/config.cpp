#include "sslreg/config.hpp"

#include <charconv>
#include <functional>
#include <iomanip>
#include <sstream>

#include "sslreg/error.hpp"
#include "sslreg/io.hpp"

namespace sslreg {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string parse_string(std::string_view v, const std::string& source, std::size_t line) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') throw ParseError(source, line, "malformed string");
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) {
      out.push_back(v[++i]);
    } else if (v[i] == '"') {
      throw ParseError(source, line, "unescaped quote in string");
    } else {
      out.push_back(v[i]);
    }
  }
  return out;
}

ConfigValue parse_value(std::string_view v, const std::string& source, std::size_t line) {
  if (v.empty()) throw ParseError(source, line, "missing value");
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') return parse_string(v, source, line);
  if (v.front() == '[') {
    if (v.back() != ']') throw ParseError(source, line, "unterminated array");
    std::vector<std::string> items;
    std::string_view body = trim(v.substr(1, v.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      items.push_back(parse_string(trim(body.substr(0, comma)), source, line));
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return items;
  }
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec == std::errc() && p == v.data() + v.size()) return i;
  double d = 0;
  auto [pd, ecd] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ecd == std::errc() && pd == v.data() + v.size()) return d;
  throw ParseError(source, line, "cannot parse value '" + std::string(v) + "'");
}

class Fields {
 public:
  Fields(std::map<std::string, ConfigValue> values, std::string source)
      : values_(std::move(values)), source_(std::move(source)) {}

  template <class Fn>
  void on(const std::string& key, Fn&& fn) {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    try {
      fn(it->second);
    } catch (const std::bad_variant_access&) {
      throw ConfigError(source_ + ": key '" + key + "' has the wrong type");
    }
    values_.erase(it);
  }

  void finish() const {
    if (!values_.empty()) throw ConfigError(source_ + ": unknown key '" + values_.begin()->first + "'");
  }

 private:
  std::map<std::string, ConfigValue> values_;
  std::string source_;
};

double as_double(const ConfigValue& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

int as_int(const ConfigValue& v) { return static_cast<int>(std::get<std::int64_t>(v)); }

}  // namespace

std::map<std::string, ConfigValue> parse_key_values(std::string_view text, const std::string& source) {
  std::map<std::string, ConfigValue> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(strip_comment(text.substr(pos, nl - pos)));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    if (out.count(key)) throw ParseError(source, line_no, "duplicate key '" + key + "'");
    out.emplace(key, parse_value(trim(line.substr(eq + 1)), source, line_no));
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (run_name.empty()) throw ConfigError("config: run_name must not be empty");
  if (train_path.empty()) throw ConfigError("config: train_path is required");
  if (min_freq < 1) throw ConfigError("config: min_freq must be >= 1");
  if (num_classes != 0 && num_classes < 2) throw ConfigError("config: num_classes must be >= 2");
  if (precision != 32 && precision != 64) throw ConfigError("config: precision must be 32 or 64");
  train.validate();
  EncoderConfig probe = encoder;
  probe.vocab_size = special::kCount + 1;
  probe.validate();
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              const std::string& source) {
  ExperimentConfig c;
  c.output_dir = base_dir / c.output_dir;
  Fields f(parse_key_values(text, source), source);
  auto path = [&](std::filesystem::path& dst) {
    return [&dst, &base_dir](const ConfigValue& v) {
      std::filesystem::path p(std::get<std::string>(v));
      dst = p.is_absolute() || p.empty() ? p : base_dir / p;
    };
  };
  f.on("run_name", [&](const ConfigValue& v) { c.run_name = std::get<std::string>(v); });
  f.on("train_path", path(c.train_path));
  f.on("dev_path", path(c.dev_path));
  f.on("test_path", path(c.test_path));
  f.on("lexicon_path", path(c.lexicon_path));
  f.on("stopwords_path", path(c.stopwords_path));
  f.on("output_dir", path(c.output_dir));
  f.on("min_freq", [&](const ConfigValue& v) { c.min_freq = as_int(v); });
  f.on("num_classes", [&](const ConfigValue& v) { c.num_classes = as_int(v); });
  f.on("precision", [&](const ConfigValue& v) { c.precision = as_int(v); });

  auto& t = c.train;
  f.on("regime", [&](const ConfigValue& v) { t.regime = parse_regime(std::get<std::string>(v)); });
  f.on("lambda", [&](const ConfigValue& v) { t.lambda = as_double(v); });
  f.on("lr_max", [&](const ConfigValue& v) { t.lr_max = as_double(v); });
  f.on("warmup_proportion", [&](const ConfigValue& v) { t.warmup_proportion = as_double(v); });
  f.on("weight_decay", [&](const ConfigValue& v) { t.weight_decay = as_double(v); });
  f.on("beta1", [&](const ConfigValue& v) { t.beta1 = as_double(v); });
  f.on("beta2", [&](const ConfigValue& v) { t.beta2 = as_double(v); });
  f.on("adam_eps", [&](const ConfigValue& v) { t.adam_eps = as_double(v); });
  f.on("epochs", [&](const ConfigValue& v) { t.epochs = as_int(v); });
  f.on("batch_size", [&](const ConfigValue& v) { t.batch_size = as_int(v); });
  f.on("grad_accum_steps", [&](const ConfigValue& v) { t.grad_accum_steps = as_int(v); });
  f.on("seed", [&](const ConfigValue& v) { t.seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v)); });
  f.on("p_mask", [&](const ConfigValue& v) { t.p_mask = as_double(v); });
  f.on("aug_rate", [&](const ConfigValue& v) { t.aug_rate = as_double(v); });
  f.on("active_ops", [&](const ConfigValue& v) {
    std::vector<AugOp> ops;
    for (const auto& name : std::get<std::vector<std::string>>(v)) ops.push_back(parse_aug_op(name));
    t.active_ops = AugOpSet(ops);
  });
  f.on("tapt_epochs", [&](const ConfigValue& v) { t.tapt_epochs = as_int(v); });
  f.on("tapt_finetune_task", [&](const ConfigValue& v) {
    const auto& s = std::get<std::string>(v);
    if (s == "mtp")
      t.tapt_finetune_task = SslTask::kMtp;
    else if (s == "satp")
      t.tapt_finetune_task = SslTask::kSatp;
    else
      throw ConfigError(source + ": tapt_finetune_task must be \"mtp\" or \"satp\"");
  });
  f.on("metric", [&](const ConfigValue& v) { t.metric = parse_metric(std::get<std::string>(v)); });

  auto& e = c.encoder;
  f.on("num_layers", [&](const ConfigValue& v) { e.num_layers = as_int(v); });
  f.on("num_heads", [&](const ConfigValue& v) { e.num_heads = as_int(v); });
  f.on("d_model", [&](const ConfigValue& v) { e.d_model = as_int(v); });
  f.on("d_ff", [&](const ConfigValue& v) { e.d_ff = as_int(v); });
  f.on("max_len", [&](const ConfigValue& v) { e.max_len = as_int(v); });
  f.on("dropout_rate", [&](const ConfigValue& v) { e.dropout_rate = as_double(v); });
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file_binary(path);
  return parse_config(text, path.parent_path(), path.string());
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  auto str = [&](const char* key, const std::string& v) { ss << key << " = \"" << v << "\"\n"; };
  auto path = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) str(key, p.string());
  };
  str("run_name", c.run_name);
  path("train_path", c.train_path);
  path("dev_path", c.dev_path);
  path("test_path", c.test_path);
  path("lexicon_path", c.lexicon_path);
  path("stopwords_path", c.stopwords_path);
  path("output_dir", c.output_dir);
  ss << "min_freq = " << c.min_freq << "\nnum_classes = " << c.num_classes << "\nprecision = " << c.precision
     << '\n';
  const auto& t = c.train;
  str("regime", regime_name(t.regime));
  ss << "lambda = " << t.lambda << "\nlr_max = " << t.lr_max << "\nwarmup_proportion = " << t.warmup_proportion
     << "\nweight_decay = " << t.weight_decay << "\nbeta1 = " << t.beta1 << "\nbeta2 = " << t.beta2
     << "\nadam_eps = " << t.adam_eps << "\nepochs = " << t.epochs << "\nbatch_size = " << t.batch_size
     << "\ngrad_accum_steps = " << t.grad_accum_steps << "\nseed = " << t.seed << "\np_mask = " << t.p_mask
     << "\naug_rate = " << t.aug_rate << "\nactive_ops = [";
  for (std::size_t i = 0; i < t.active_ops.size(); ++i)
    ss << (i ? ", " : "") << '"' << aug_op_name(t.active_ops.op_at(i)) << '"';
  ss << "]\ntapt_epochs = " << t.tapt_epochs << '\n';
  str("tapt_finetune_task", t.tapt_finetune_task == SslTask::kSatp ? "satp" : "mtp");
  str("metric", metric_name(t.metric));
  const auto& e = c.encoder;
  ss << "num_layers = " << e.num_layers << "\nnum_heads = " << e.num_heads << "\nd_model = " << e.d_model
     << "\nd_ff = " << e.d_ff << "\nmax_len = " << e.max_len << "\ndropout_rate = " << e.dropout_rate << '\n';
  return ss.str();
}

}  // namespace sslreg
