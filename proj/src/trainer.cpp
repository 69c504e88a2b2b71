#include "dyco/trainer.hpp"

#include "dyco/error.hpp"
#include "dyco/parallel.hpp"
#include "dyco/rng.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace dyco {

namespace {

constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamBatch = 2;
constexpr std::uint64_t kStreamStrata = 3;
constexpr std::uint64_t kStreamProbe = 4;
constexpr std::uint64_t kStreamProbeStrata = 5;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0 || x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw Error(ErrorCode::ParseError, "bad integer for " + key + ": '" + v + "'");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  if (v.empty() || v[0] == '-') throw Error(ErrorCode::ParseError, "bad unsigned for " + key + ": '" + v + "'");
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (*end != '\0' || errno != 0) throw Error(ErrorCode::ParseError, "bad unsigned for " + key + ": '" + v + "'");
  return x;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(x)) throw Error(ErrorCode::ParseError, "bad real for " + key + ": '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw Error(ErrorCode::ParseError, "bad boolean for " + key + ": '" + v + "'");
}

std::string real_text(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

bool TrainConfig::set(const std::string& key, const std::string& v) {
  if (key == "iterations") iterations = parse_int(key, v);
  else if (key == "rays_per_batch") rays_per_batch = parse_int(key, v);
  else if (key == "n_samples") n_samples = parse_int(key, v);
  else if (key == "lr_triplane") lr_triplane = parse_real(key, v);
  else if (key == "lr_other") lr_other = parse_real(key, v);
  else if (key == "seed") seed = parse_u64(key, v);
  else if (key == "nonrigid_ramp") nonrigid_ramp = parse_real(key, v);
  else if (key == "seq_len") seq_len = parse_int(key, v);
  else if (key == "seq_step") seq_step = parse_int(key, v);
  else if (key == "delta_step") delta_step = parse_int(key, v);
  else if (key == "rotation_rep") {
    try {
      rotation_rep = parse_rot_representation(v);
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, "bad rotation_rep: '" + v + "'");
    }
  } else if (key == "delta_condition") delta_condition = parse_bool(key, v);
  else if (key == "plane_resolutions") {
    std::vector<int> r;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) r.push_back(parse_int(key, trim(item)));
    if (r.empty()) throw Error(ErrorCode::ParseError, "empty plane_resolutions");
    plane_resolutions = r;
  } else if (key == "plane_features") plane_features = parse_int(key, v);
  else if (key == "density_width") density_width = parse_int(key, v);
  else if (key == "color_width") color_width = parse_int(key, v);
  else if (key == "nonrigid_width") nonrigid_width = parse_int(key, v);
  else if (key == "pe_freqs") pe_freqs = parse_int(key, v);
  else if (key == "blend_resolution") blend_resolution = parse_int(key, v);
  else if (key == "bounds_margin") bounds_margin = parse_real(key, v);
  else if (key == "log_every") log_every = parse_int(key, v);
  else if (key == "probe_rays") probe_rays = parse_int(key, v);
  else return false;
  return true;
}

void TrainConfig::validate() const {
  auto positive = [](int x, const char* name) {
    if (x <= 0) throw Error(ErrorCode::ParseError, std::string(name) + " must be positive");
  };
  positive(iterations, "iterations");
  positive(rays_per_batch, "rays_per_batch");
  positive(n_samples, "n_samples");
  positive(seq_len, "seq_len");
  positive(seq_step, "seq_step");
  positive(delta_step, "delta_step");
  positive(plane_features, "plane_features");
  positive(density_width, "density_width");
  positive(color_width, "color_width");
  positive(nonrigid_width, "nonrigid_width");
  positive(log_every, "log_every");
  positive(probe_rays, "probe_rays");
  if (pe_freqs < 0) throw Error(ErrorCode::ParseError, "pe_freqs must be non-negative");
  if (blend_resolution < 2) throw Error(ErrorCode::ParseError, "blend_resolution must be at least 2");
  for (int r : plane_resolutions)
    if (r < 2) throw Error(ErrorCode::ParseError, "plane resolutions must be at least 2");
  if (!(nonrigid_ramp >= 0.0 && nonrigid_ramp <= 1.0)) throw Error(ErrorCode::ParseError, "nonrigid_ramp must lie in [0, 1]");
  if (!(lr_triplane >= 0.0) || !(lr_other >= 0.0)) throw Error(ErrorCode::ParseError, "learning rates must be non-negative");
  if (!(bounds_margin >= 0.0)) throw Error(ErrorCode::ParseError, "bounds_margin must be non-negative");
}

ModelShape TrainConfig::model_shape() const {
  ModelShape s;
  s.field.resolutions = plane_resolutions;
  s.field.features = plane_features;
  s.field.density_width = density_width;
  s.field.color_width = color_width;
  s.blend_resolution = blend_resolution;
  s.nonrigid_width = nonrigid_width;
  s.pe_freqs = pe_freqs;
  s.sequence_length = seq_len;
  s.bounds_margin = bounds_margin;
  return s;
}

std::string config_to_string(const TrainConfig& c) {
  std::ostringstream out;
  out << "iterations = " << c.iterations << "\n";
  out << "rays_per_batch = " << c.rays_per_batch << "\n";
  out << "n_samples = " << c.n_samples << "\n";
  out << "lr_triplane = " << real_text(c.lr_triplane) << "\n";
  out << "lr_other = " << real_text(c.lr_other) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "nonrigid_ramp = " << real_text(c.nonrigid_ramp) << "\n";
  out << "seq_len = " << c.seq_len << "\n";
  out << "seq_step = " << c.seq_step << "\n";
  out << "delta_step = " << c.delta_step << "\n";
  out << "rotation_rep = " << to_string(c.rotation_rep) << "\n";
  out << "delta_condition = " << (c.delta_condition ? "true" : "false") << "\n";
  out << "plane_resolutions = ";
  for (std::size_t i = 0; i < c.plane_resolutions.size(); ++i) out << (i ? "," : "") << c.plane_resolutions[i];
  out << "\n";
  out << "plane_features = " << c.plane_features << "\n";
  out << "density_width = " << c.density_width << "\n";
  out << "color_width = " << c.color_width << "\n";
  out << "nonrigid_width = " << c.nonrigid_width << "\n";
  out << "pe_freqs = " << c.pe_freqs << "\n";
  out << "blend_resolution = " << c.blend_resolution << "\n";
  out << "bounds_margin = " << real_text(c.bounds_margin) << "\n";
  out << "log_every = " << c.log_every << "\n";
  out << "probe_rays = " << c.probe_rays << "\n";
  return out.str();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(n) + ": empty key");
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

TrainConfig config_from_string(const std::string& text) {
  TrainConfig c;
  for (const auto& [k, v] : parse_key_values(text))
    if (!c.set(k, v)) throw Error(ErrorCode::ParseError, "unknown config key '" + k + "'");
  c.validate();
  return c;
}

double mse_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::LengthMismatch, "prediction and target batches differ in length");
  if (pred.empty()) throw Error(ErrorCode::LengthMismatch, "empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - gt[i]).squaredNorm();
  return sum / static_cast<double>(pred.size());
}

// ---- checkpoint bytes ----

namespace {

enum class Dtype : std::uint8_t { F64 = 0, Text = 1, U64 = 2 };

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));  // host is little-endian (checked below)
  }
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void record(const std::string& name, Dtype dt, const std::vector<std::uint64_t>& shape, const void* data,
              std::size_t n) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name.data(), name.size());
    pod<std::uint8_t>(static_cast<std::uint8_t>(dt));
    pod<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (auto s : shape) pod<std::uint64_t>(s);
    pod<std::uint64_t>(n);
    bytes(data, n);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

  struct Record {
    std::string name;
    Dtype dtype;
    std::vector<std::uint64_t> shape;
    std::string data;
  };
  Record record() {
    Record r;
    r.name = str(pod<std::uint32_t>());
    const auto dt = pod<std::uint8_t>();
    if (dt > 2) throw Error(ErrorCode::CorruptFile, "unknown dtype in record " + r.name);
    r.dtype = static_cast<Dtype>(dt);
    const auto nd = pod<std::uint32_t>();
    if (nd > 16) throw Error(ErrorCode::CorruptFile, "implausible rank in record " + r.name);
    for (std::uint32_t i = 0; i < nd; ++i) r.shape.push_back(pod<std::uint64_t>());
    const auto n = pod<std::uint64_t>();
    r.data = str(n);
    return r;
  }

 private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) throw Error(ErrorCode::CorruptFile, "checkpoint truncated");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

bool little_endian() {
  const std::uint16_t x = 1;
  unsigned char c;
  std::memcpy(&c, &x, 1);
  return c == 1;
}

void write_arrays(Writer& w, const std::string& prefix, const std::vector<NamedArray>& arrays) {
  for (const auto& a : arrays) w.record(prefix + a.name, Dtype::F64, a.shape, a.data.data(), a.data.size() * sizeof(double));
}

NamedArray array_from(const Reader::Record& r, std::size_t prefix) {
  if (r.dtype != Dtype::F64 || r.data.size() % sizeof(double) != 0)
    throw Error(ErrorCode::CorruptFile, "bad array record " + r.name);
  NamedArray a;
  a.name = r.name.substr(prefix);
  a.shape = r.shape;
  std::uint64_t count = 1;
  for (auto s : r.shape) count *= s;
  a.data.resize(r.data.size() / sizeof(double));
  if (count != a.data.size()) throw Error(ErrorCode::CorruptFile, "shape disagrees with data in " + r.name);
  std::memcpy(a.data.data(), r.data.data(), r.data.size());
  return a;
}

std::uint64_t u64_from(const Reader::Record& r) {
  if (r.dtype != Dtype::U64 || r.data.size() != 8) throw Error(ErrorCode::CorruptFile, "bad scalar record " + r.name);
  std::uint64_t v;
  std::memcpy(&v, r.data.data(), 8);
  return v;
}

}  // namespace

std::string checkpoint_to_bytes(const Checkpoint& c) {
  if (!little_endian()) throw Error(ErrorCode::IoError, "big-endian hosts are not supported");
  Writer w;
  w.bytes("DYCO", 4);
  w.pod<std::uint32_t>(Checkpoint::kVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(4 + c.params.size() + c.adam_m.size() + c.adam_v.size()));
  w.record("config", Dtype::Text, {c.config.size()}, c.config.data(), c.config.size());
  w.record("skeleton", Dtype::Text, {c.skeleton.size()}, c.skeleton.data(), c.skeleton.size());
  write_arrays(w, "param/", c.params);
  write_arrays(w, "adam_m/", c.adam_m);
  write_arrays(w, "adam_v/", c.adam_v);
  w.record("adam_step", Dtype::U64, {}, &c.adam_step, 8);
  w.record("iteration", Dtype::U64, {}, &c.iteration, 8);
  return w.take();
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  if (!little_endian()) throw Error(ErrorCode::IoError, "big-endian hosts are not supported");
  Reader r(bytes);
  if (r.str(4) != "DYCO") throw Error(ErrorCode::CorruptFile, "missing DYCO magic");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(Checkpoint::kVersion));
  const auto count = r.pod<std::uint32_t>();
  Checkpoint c;
  bool have_config = false, have_skel = false, have_step = false, have_iter = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto rec = r.record();
    if (rec.name == "config" && rec.dtype == Dtype::Text) {
      c.config = rec.data;
      have_config = true;
    } else if (rec.name == "skeleton" && rec.dtype == Dtype::Text) {
      c.skeleton = rec.data;
      have_skel = true;
    } else if (rec.name.rfind("param/", 0) == 0) {
      c.params.push_back(array_from(rec, 6));
    } else if (rec.name.rfind("adam_m/", 0) == 0) {
      c.adam_m.push_back(array_from(rec, 7));
    } else if (rec.name.rfind("adam_v/", 0) == 0) {
      c.adam_v.push_back(array_from(rec, 7));
    } else if (rec.name == "adam_step") {
      c.adam_step = u64_from(rec);
      have_step = true;
    } else if (rec.name == "iteration") {
      c.iteration = u64_from(rec);
      have_iter = true;
    } else {
      throw Error(ErrorCode::CorruptFile, "unexpected record " + rec.name);
    }
  }
  if (!r.done()) throw Error(ErrorCode::CorruptFile, "trailing bytes after the last record");
  if (!(have_config && have_skel && have_step && have_iter)) throw Error(ErrorCode::CorruptFile, "missing records");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = checkpoint_to_bytes(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_bytes(read_text_file(path));
}

Checkpoint make_checkpoint(const TrainConfig& config, const DycoModel& model, const AdamState& adam,
                           std::uint64_t iteration) {
  Checkpoint c;
  c.config = config_to_string(config);
  c.skeleton = skeleton_to_string(model.tree());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const Param& p = model.params()[i];
    std::vector<std::uint64_t> shape(p.shape.begin(), p.shape.end());
    c.params.push_back({p.name, shape, p.value});
    if (!adam.m.empty()) {
      c.adam_m.push_back({p.name, shape, adam.m[i]});
      c.adam_v.push_back({p.name, shape, adam.v[i]});
    }
  }
  c.adam_step = adam.step;
  c.iteration = iteration;
  return c;
}

void restore_checkpoint(const Checkpoint& ckpt, DycoModel& model, AdamState* adam) {
  const ParamStore& store = model.params();
  if (ckpt.params.size() != store.size()) throw Error(ErrorCode::ShapeMismatch, "parameter count differs from model");
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param& p = store[i];
    const NamedArray& a = ckpt.params[i];
    if (a.name != p.name || a.data.size() != p.size())
      throw Error(ErrorCode::ShapeMismatch, "checkpoint array " + a.name + " does not match " + p.name);
    p.value = a.data;
  }
  if (adam) {
    if (ckpt.adam_m.size() != store.size() || ckpt.adam_v.size() != store.size())
      throw Error(ErrorCode::ShapeMismatch, "optimizer state missing from checkpoint");
    *adam = AdamState(store);
    for (std::size_t i = 0; i < store.size(); ++i) {
      if (ckpt.adam_m[i].data.size() != store[i].size() || ckpt.adam_v[i].data.size() != store[i].size())
        throw Error(ErrorCode::ShapeMismatch, "optimizer state shape differs for " + store[i].name);
      adam->m[i] = ckpt.adam_m[i].data;
      adam->v[i] = ckpt.adam_v[i].data;
    }
    adam->step = ckpt.adam_step;
  }
}

std::unique_ptr<DycoModel> model_from_checkpoint(const Checkpoint& ckpt) {
  const TrainConfig cfg = config_from_string(ckpt.config);
  auto model = std::make_unique<DycoModel>(skeleton_from_string(ckpt.skeleton), cfg.model_shape(),
                                           derive_seed({cfg.seed, kStreamInit}));
  restore_checkpoint(ckpt, *model, nullptr);
  return model;
}

// ---- training ----

double nonrigid_ramp(const TrainConfig& config, int iteration) {
  if (config.nonrigid_ramp <= 0.0) return 1.0;
  return std::min(1.0, iteration / (config.nonrigid_ramp * config.iterations));
}

ConditionOptions condition_options(const TrainConfig& config, double alpha) {
  ConditionOptions o;
  o.sequence = config.sequence_params();
  o.rep = config.rotation_rep;
  o.alpha = alpha;
  o.delta_condition = config.delta_condition;
  return o;
}

namespace {

struct PixelRef {
  int frame, cam, u, v;
};

PixelRef sample_pixel(const Dataset& data, int frame, const std::vector<int>& cams,
                      const std::vector<std::vector<int>>& fg, Rng& rng) {
  const int cam = cams[rng.below(cams.size())];
  const Camera& c = data.cameras[cam];
  const auto& list = fg[static_cast<std::size_t>(frame) * data.cameras.size() + cam];
  const bool from_mask = rng.uniform() < 0.5;
  int idx;
  if (from_mask && !list.empty()) idx = list[rng.below(list.size())];
  else idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.width) * c.height));
  return {frame, cam, idx % c.width, idx / c.width};
}

Vec3 pixel_color(const Image& img, int u, int v) { return {img.at(u, v, 0), img.at(u, v, 1), img.at(u, v, 2)}; }

double probe_psnr(const DycoModel& model, const TrainConfig& config, const Dataset& data,
                  const std::vector<PixelRef>& probe, double ramp, int threads) {
  RenderSettings rs{config.n_samples, ramp, threads};
  const ConditionOptions opts = condition_options(config);
  double sum = 0.0;
  std::size_t start = 0;
  while (start < probe.size()) {
    std::size_t end = start;
    while (end < probe.size() && probe[end].frame == probe[start].frame) ++end;
    const FrameCondition cond = make_condition(model, data.track, probe[start].frame, opts);
    const FrameContext ctx = encode_frame(model, cond, false);
    std::vector<RayTask> tasks;
    for (std::size_t i = start; i < end; ++i)
      tasks.push_back({generate_ray(data.cameras[probe[i].cam], probe[i].u, probe[i].v),
                       derive_seed({config.seed, kStreamProbeStrata, i})});
    const auto colors = render_rays(model, cond, ctx, tasks, rs);
    for (std::size_t i = start; i < end; ++i) {
      const Vec3 gt = pixel_color(data.image(probe[i].frame, probe[i].cam), probe[i].u, probe[i].v);
      sum += (colors[i - start] - gt).squaredNorm();
    }
    start = end;
  }
  const double mse = sum / (3.0 * static_cast<double>(probe.size()));
  return mse > 0.0 ? -10.0 * std::log10(mse) : std::numeric_limits<double>::infinity();
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data, const TrainOptions& options) {
  config.validate();
  if (data.frames == 0 || data.train_cams == 0) throw Error(ErrorCode::DatasetEmpty, "dataset has no training views");
  DycoModel model(data.tree, config.model_shape(), derive_seed({config.seed, kStreamInit}));
  AdamState adam(model.params());
  int start = 0;
  if (options.resume) {
    restore_checkpoint(*options.resume, model, &adam);
    start = static_cast<int>(options.resume->iteration);
  }
  const int end = options.stop_after >= 0 ? std::min(options.stop_after, config.iterations) : config.iterations;

  const int cams = static_cast<int>(data.cameras.size());
  std::vector<std::vector<int>> fg(static_cast<std::size_t>(data.frames) * cams);
  for (int f = 0; f < data.frames; ++f)
    for (int c = 0; c < cams; ++c) {
      const Image& m = data.mask(f, c);
      auto& list = fg[static_cast<std::size_t>(f) * cams + c];
      for (int i = 0; i < m.width * m.height; ++i)
        if (m.data[i] > 0.5) list.push_back(i);
    }
  std::vector<int> train_cams, probe_cams;
  for (int c = 0; c < data.train_cams; ++c) train_cams.push_back(c);
  for (int c = data.train_cams; c < cams; ++c) probe_cams.push_back(c);
  if (probe_cams.empty()) probe_cams = train_cams;

  // Probe pixels, grouped by frame so each frame is encoded once.
  std::vector<PixelRef> probe;
  {
    Rng rng(derive_seed({config.seed, kStreamProbe}));
    for (int i = 0; i < config.probe_rays; ++i) {
      const int frame = static_cast<int>(rng.below(data.frames));
      probe.push_back(sample_pixel(data, frame, probe_cams, fg, rng));
    }
    std::stable_sort(probe.begin(), probe.end(), [](const PixelRef& a, const PixelRef& b) { return a.frame < b.frame; });
  }

  TrainResult result;
  auto emit = [&](int it, double loss, double ramp) {
    LogEntry e{it, loss, probe_psnr(model, config, data, probe, ramp, options.threads)};
    result.log.push_back(e);
    if (options.on_log) options.on_log(e);
  };

  const ConditionOptions opts = condition_options(config);
  GradBuffer grads(model.params(), false);
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  for (int it = start; it < end; ++it) {
    const int frame = it % data.frames;
    const double ramp = nonrigid_ramp(config, it);
    const FrameCondition cond = make_condition(model, data.track, frame, opts);
    const FrameContext ctx = encode_frame(model, cond, true);

    Rng rng(derive_seed({config.seed, kStreamBatch, static_cast<std::uint64_t>(it)}));
    std::vector<RayTask> tasks(config.rays_per_batch);
    std::vector<Vec3> targets(config.rays_per_batch);
    for (int r = 0; r < config.rays_per_batch; ++r) {
      const PixelRef p = sample_pixel(data, frame, train_cams, fg, rng);
      tasks[r] = {generate_ray(data.cameras[p.cam], p.u, p.v),
                  derive_seed({config.seed, kStreamStrata, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(r)})};
      targets[r] = pixel_color(data.image(frame, p.cam), p.u, p.v);
    }
    grads.zero();
    const BatchResult br =
        batch_loss_and_gradient(model, cond, ctx, tasks, targets, {config.n_samples, ramp, options.threads}, grads);
    if (!std::isfinite(br.loss))
      throw Error(ErrorCode::NonFiniteLoss, "loss is " + std::to_string(br.loss) + " at iteration " +
                                                std::to_string(it) + " (frame " + std::to_string(frame) + ")");
    last_loss = br.loss;
    if (it % config.log_every == 0) emit(it, br.loss, ramp);
    adam_step(model.params(), grads, adam, config.lr_triplane, config.lr_other);
  }
  if (end > start && end == config.iterations) emit(end, last_loss, nonrigid_ramp(config, end));
  result.checkpoint = make_checkpoint(config, model, adam, static_cast<std::uint64_t>(std::max(start, end)));
  return result;
}

Image render_image(const DycoModel& model, const FrameCondition& cond, const Camera& cam, int n_samples,
                   double ramp, std::uint64_t seed, int threads) {
  const FrameContext ctx = encode_frame(model, cond, false);
  std::vector<RayTask> tasks;
  tasks.reserve(static_cast<std::size_t>(cam.width) * cam.height);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u)
      tasks.push_back({generate_ray(cam, u, v), derive_seed({seed, static_cast<std::uint64_t>(v * cam.width + u)})});
  const auto colors = render_rays(model, cond, ctx, tasks, {n_samples, ramp, threads});
  Image img(cam.width, cam.height, 3);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u)
      for (int c = 0; c < 3; ++c) img.at(u, v, c) = std::clamp(colors[v * cam.width + u][c], 0.0, 1.0);
  return img;
}

}  // namespace dyco
