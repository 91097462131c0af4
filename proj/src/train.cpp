#include "spgan/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "spgan/ops.hpp"
#include "spgan/rng.hpp"

namespace spgan {

namespace {

using nlohmann::json;

// independent RNG lanes derived from the config seed
constexpr uint64_t kLaneCorpus = 1;
constexpr uint64_t kLaneStream = 2;
constexpr uint64_t kLaneInitG = 3;
constexpr uint64_t kLaneInitD = 4;

std::map<std::string, Tensor> named_params(ModelParams& p, const std::string& prefix) {
  std::map<std::string, Tensor> out;
  for (auto& [id, lp] : p.entries()) {
    out.emplace(prefix + "." + id + ".kernel", lp.kernel);
    out.emplace(prefix + "." + id + ".bias", lp.bias);
  }
  return out;
}

Tensor pack_rng(const SeededRng::State& st) {
  std::vector<double> v;
  for (int i = 0; i < 4; ++i) {
    v.push_back(static_cast<double>(st.s[i] >> 32));
    v.push_back(static_cast<double>(st.s[i] & 0xffffffffULL));
  }
  v.push_back(st.has_spare ? 1.0 : 0.0);
  v.push_back(st.spare);
  return Tensor::from_data({10}, std::move(v));
}

SeededRng::State unpack_rng(const Tensor& t) {
  if (t.size() != 10)
    throw std::runtime_error("checkpoint: rng.stream has wrong length");
  SeededRng::State st{};
  for (int i = 0; i < 4; ++i) {
    const auto hi = static_cast<uint64_t>(t.data()[2 * i]);
    const auto lo = static_cast<uint64_t>(t.data()[2 * i + 1]);
    st.s[i] = (hi << 32) | lo;
  }
  st.has_spare = t.data()[8] != 0.0;
  st.spare = t.data()[9];
  return st;
}

struct LiveState {
  TrainConfig cfg;
  Stage stage;
  LayerGraph gen, disc;
  ModelParams gen_params, disc_params;
  AdamState adam_g, adam_d;
  SeededRng stream{0};
  int64_t step = 0;
};

LayerGraph build_gen(const TrainConfig& cfg, Stage stage) {
  return stage == Stage::mask
             ? build_mask_generator(cfg.resolution, cfg.noise_side)
             : build_unet_generator(cfg.resolution, cfg.unet_base);
}

LayerGraph build_disc(const TrainConfig& cfg, Stage stage) {
  const int in_ch = stage == Stage::mask ? 3 : 4;
  return build_discriminator(cfg.variant, in_ch, cfg.resolution);
}

void load_params_from(const Checkpoint& ckpt, const std::string& prefix,
                      ModelParams& params) {
  for (auto& [id, lp] : params.entries()) {
    for (const char* part : {"kernel", "bias"}) {
      const std::string name = prefix + "." + id + "." + part;
      auto it = ckpt.tensors.find(name);
      if (it == ckpt.tensors.end())
        throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
      Tensor& dst = std::string(part) == "kernel" ? lp.kernel : lp.bias;
      if (it->second.shape() != dst.shape())
        throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " +
                                 shape_str(it->second.shape()) + ", expected " +
                                 shape_str(dst.shape()));
      std::copy(it->second.data(), it->second.data() + it->second.size(), dst.data());
    }
  }
}

void load_adam_from(const Checkpoint& ckpt, const std::string& lane, AdamState& adam,
                    const std::map<std::string, Tensor>& params) {
  const std::string step_name = "adam." + lane + ".step";
  auto st = ckpt.tensors.find(step_name);
  if (st == ckpt.tensors.end())
    throw std::runtime_error("checkpoint: missing tensor '" + step_name + "'");
  adam.set_step_count(static_cast<int64_t>(st->second.item()));
  for (const auto& [name, t] : params) {
    for (const char* part : {"m", "v"}) {
      const std::string key = "adam." + lane + "." + name + "." + part;
      auto it = ckpt.tensors.find(key);
      if (it == ckpt.tensors.end())
        throw std::runtime_error("checkpoint: missing tensor '" + key + "'");
      auto& mom = adam.moments()[name];
      auto& buf = std::string(part) == "m" ? mom.m : mom.v;
      buf.assign(it->second.data(), it->second.data() + it->second.size());
      if (static_cast<int64_t>(buf.size()) != t.size())
        throw std::runtime_error("checkpoint: tensor '" + key + "' length mismatch");
    }
  }
}

Checkpoint snapshot(LiveState& st) {
  Checkpoint ckpt;
  ckpt.config_text = train_config_to_json(st.cfg, st.stage);
  for (auto& [name, t] : named_params(st.gen_params, "g"))
    ckpt.tensors.emplace(name, t.detached());
  for (auto& [name, t] : named_params(st.disc_params, "d"))
    ckpt.tensors.emplace(name, t.detached());
  const auto dump_adam = [&](const char* lane, AdamState& adam,
                             std::map<std::string, Tensor> params) {
    ckpt.tensors.emplace(std::string("adam.") + lane + ".step",
                         Tensor::scalar(static_cast<double>(adam.step_count())));
    for (const auto& [name, t] : params) {
      auto& mom = adam.moments()[name];
      if (mom.m.empty()) {
        mom.m.assign(static_cast<size_t>(t.size()), 0.0);
        mom.v.assign(static_cast<size_t>(t.size()), 0.0);
      }
      ckpt.tensors.emplace(std::string("adam.") + lane + "." + name + ".m",
                           Tensor::from_data(t.shape(), mom.m));
      ckpt.tensors.emplace(std::string("adam.") + lane + "." + name + ".v",
                           Tensor::from_data(t.shape(), mom.v));
    }
  };
  dump_adam("g", st.adam_g, named_params(st.gen_params, ""));
  dump_adam("d", st.adam_d, named_params(st.disc_params, ""));
  ckpt.tensors.emplace("rng.stream", pack_rng(st.stream.state()));
  ckpt.tensors.emplace("meta.step", Tensor::scalar(static_cast<double>(st.step)));
  return ckpt;
}

LiveState make_state(const TrainConfig& cfg, Stage stage, const std::string& resume_path) {
  TrainConfig effective = cfg;
  if (!resume_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume_path);
    auto [saved_cfg, saved_stage] = train_config_from_json(ckpt.config_text, TrainConfig{});
    if (saved_stage != stage)
      throw std::runtime_error("resume: checkpoint is for stage '" +
                               std::string(to_string(saved_stage)) +
                               "', requested stage '" + to_string(stage) + "'");
    effective = saved_cfg;
    effective.epochs = cfg.epochs;  // only the step target comes from the caller

    LiveState st{effective,
                 stage,
                 build_gen(effective, stage),
                 build_disc(effective, stage),
                 {},
                 {},
                 AdamState({effective.lr, effective.beta1, effective.beta2, 1e-8}),
                 AdamState({effective.lr, effective.beta1, effective.beta2, 1e-8})};
    SeededRng init_g(SeededRng::derive(effective.seed, kLaneInitG));
    SeededRng init_d(SeededRng::derive(effective.seed, kLaneInitD));
    st.gen_params = ModelParams::init(st.gen, init_g);
    st.disc_params = ModelParams::init(st.disc, init_d);
    load_params_from(ckpt, "g", st.gen_params);
    load_params_from(ckpt, "d", st.disc_params);
    load_adam_from(ckpt, "g", st.adam_g, named_params(st.gen_params, ""));
    load_adam_from(ckpt, "d", st.adam_d, named_params(st.disc_params, ""));
    auto rs = ckpt.tensors.find("rng.stream");
    auto ms = ckpt.tensors.find("meta.step");
    if (rs == ckpt.tensors.end() || ms == ckpt.tensors.end())
      throw std::runtime_error("checkpoint: missing rng.stream or meta.step");
    st.stream.set_state(unpack_rng(rs->second));
    st.step = static_cast<int64_t>(ms->second.item());
    return st;
  }

  LiveState st{effective,
               stage,
               build_gen(effective, stage),
               build_disc(effective, stage),
               {},
               {},
               AdamState({effective.lr, effective.beta1, effective.beta2, 1e-8}),
               AdamState({effective.lr, effective.beta1, effective.beta2, 1e-8})};
  SeededRng init_g(SeededRng::derive(effective.seed, kLaneInitG));
  SeededRng init_d(SeededRng::derive(effective.seed, kLaneInitD));
  st.gen_params = ModelParams::init(st.gen, init_g);
  st.disc_params = ModelParams::init(st.disc, init_d);
  st.stream = SeededRng(SeededRng::derive(effective.seed, kLaneStream));
  return st;
}

PairedDataset load_training_data(const TrainConfig& cfg) {
  if (!cfg.manifest.empty()) return load_dataset(cfg.manifest, cfg.resolution);
  return synth_corpus(cfg.synthetic_n, cfg.resolution,
                      SeededRng::derive(cfg.seed, kLaneCorpus));
}

void check_finite(double v, const char* what, int64_t step) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("training aborted: ") + what +
                             " is non-finite at step " + std::to_string(step) +
                             "; last checkpoint retained");
}

struct CsvWriter {
  std::ofstream out;
  explicit CsvWriter(const std::string& path) : out(path) {
    if (!out) throw std::runtime_error("cannot open loss csv '" + path + "'");
    out << "step,loss_d,loss_g_bce,loss_g_l1,loss_g_total\n";
  }
  void row(const StepLog& l) {
    out << l.step << "," << format_g17(l.loss_d) << "," << format_g17(l.loss_g_bce)
        << "," << format_g17(l.loss_g_l1) << "," << format_g17(l.loss_g_total)
        << "\n";
    out.flush();
  }
};

TrainResult run_training(const TrainConfig& cfg, Stage stage, const std::string& out_dir,
                         const std::string& resume_path) {
  std::filesystem::create_directories(out_dir);
  LiveState st = make_state(cfg, stage, resume_path);
  const PairedDataset data = load_training_data(st.cfg);
  if (static_cast<int>(data.items.size()) < 1)
    throw std::runtime_error("training: empty dataset");

  const int r = st.cfg.resolution;
  const int map_side = r / 8;
  const Tensor ones_map = Tensor::full({1, map_side, map_side}, 1.0);
  const Tensor zeros_map = Tensor::zeros({1, map_side, map_side});
  const int64_t noise_len = static_cast<int64_t>(st.cfg.noise_side) * st.cfg.noise_side *
                            st.cfg.noise_side;

  TrainResult result;
  result.loss_csv_path = (std::filesystem::path(out_dir) / "loss.csv").string();
  CsvWriter csv(result.loss_csv_path);
  const std::string final_path =
      (std::filesystem::path(out_dir) / "ckpt_final.spgn").string();

  const int64_t target = st.step + st.cfg.epochs;
  while (st.step < target) {
    const int64_t step = st.step + 1;

    // one (augmented) sample
    const size_t idx = static_cast<size_t>(st.stream.below(data.items.size()));
    const uint64_t aug_seed = st.stream.next_u64();
    const PairedItem& item = data.items[idx];
    const AugmentedPair aug =
        augment(item.mask, stage == Stage::em ? &item.em : nullptr,
                st.cfg.crop_area, aug_seed);

    Tensor noise;
    if (stage == Stage::mask) {
      const int ns = st.cfg.noise_side;
      noise = Tensor::from_data({ns, ns, ns},
                                st.stream.normal_vec(static_cast<size_t>(noise_len)));
    }

    StepLog log{};
    log.step = step;

    // discriminator step; the fake is produced untracked, i.e. detached
    {
      Tensor fake = stage == Stage::mask
                        ? forward(st.gen, st.gen_params, noise)
                        : forward(st.gen, st.gen_params, aug.mask.field);
      Tape tape;
      st.disc_params.watch_all(tape);
      Tensor real_in = stage == Stage::mask
                           ? aug.mask.field
                           : concat_channels({aug.mask.field, aug.em->intensity});
      Tensor fake_in = stage == Stage::mask
                           ? fake
                           : concat_channels({aug.mask.field, fake});
      Tensor loss =
          add(bce_loss(forward(st.disc, st.disc_params, real_in), ones_map),
              bce_loss(forward(st.disc, st.disc_params, fake_in), zeros_map));
      tape.backward(loss);
      log.loss_d = loss.item();
      check_finite(log.loss_d, "discriminator loss", step);
      auto params = named_params(st.disc_params, "");
      st.adam_d.step(params);
    }

    // generator step (non-saturating: fake scored against the real target)
    {
      Tape tape;
      st.gen_params.watch_all(tape);
      Tensor fake = stage == Stage::mask
                        ? forward(st.gen, st.gen_params, noise)
                        : forward(st.gen, st.gen_params, aug.mask.field);
      Tensor fake_in = stage == Stage::mask
                           ? fake
                           : concat_channels({aug.mask.field, fake});
      Tensor bce = bce_loss(forward(st.disc, st.disc_params, fake_in), ones_map);
      Tensor total = bce;
      log.loss_g_bce = bce.item();
      log.loss_g_l1 = 0.0;
      if (stage == Stage::em) {
        Tensor l1 = l1_loss(fake, aug.em->intensity);
        log.loss_g_l1 = l1.item();
        total = add(bce, scale(l1, st.cfg.lambda_l1));
      }
      log.loss_g_total = total.item();
      check_finite(log.loss_g_bce, "generator bce loss", step);
      check_finite(log.loss_g_total, "generator total loss", step);
      if (!st.cfg.freeze_g) {
        tape.backward(total);
        auto params = named_params(st.gen_params, "");
        st.adam_g.step(params);
      }
    }

    st.step = step;
    csv.row(log);
    result.log.push_back(log);

    if (st.cfg.checkpoint_interval > 0 && step % st.cfg.checkpoint_interval == 0) {
      const std::string path =
          (std::filesystem::path(out_dir) / ("ckpt_step" + std::to_string(step) + ".spgn"))
              .string();
      save_checkpoint(snapshot(st), path);
    }
  }

  result.checkpoint = snapshot(st);
  save_checkpoint(result.checkpoint, final_path);
  result.checkpoint_path = final_path;
  return result;
}

}  // namespace

const char* to_string(Stage s) { return s == Stage::mask ? "mask" : "em"; }

std::string train_config_to_json(const TrainConfig& cfg, Stage stage) {
  json j;
  j["stage"] = to_string(stage);
  j["resolution"] = cfg.resolution;
  j["batch"] = cfg.batch;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["lambda_l1"] = cfg.lambda_l1;
  j["variant"] = to_string(cfg.variant);
  j["crop_area"] = cfg.crop_area;
  j["seed"] = cfg.seed;
  j["checkpoint_interval"] = cfg.checkpoint_interval;
  j["manifest"] = cfg.manifest;
  j["synthetic_n"] = cfg.synthetic_n;
  j["noise_side"] = cfg.noise_side;
  j["unet_base"] = cfg.unet_base;
  j["freeze_g"] = cfg.freeze_g;
  return j.dump(2) + "\n";
}

std::pair<TrainConfig, Stage> train_config_from_json(const std::string& text,
                                                     const TrainConfig& defaults) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config: top level must be an object");

  TrainConfig cfg = defaults;
  Stage stage = Stage::mask;
  bool has_stage = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "stage") {
        const std::string s = value.get<std::string>();
        if (s == "mask")
          stage = Stage::mask;
        else if (s == "em")
          stage = Stage::em;
        else
          throw std::runtime_error("expected 'mask' or 'em'");
        has_stage = true;
      } else if (key == "resolution")
        cfg.resolution = value.get<int>();
      else if (key == "batch")
        cfg.batch = value.get<int>();
      else if (key == "epochs")
        cfg.epochs = value.get<int>();
      else if (key == "lr")
        cfg.lr = value.get<double>();
      else if (key == "beta1")
        cfg.beta1 = value.get<double>();
      else if (key == "beta2")
        cfg.beta2 = value.get<double>();
      else if (key == "lambda_l1")
        cfg.lambda_l1 = value.get<double>();
      else if (key == "variant")
        cfg.variant = disc_variant_from_string(value.get<std::string>());
      else if (key == "crop_area")
        cfg.crop_area = value.get<double>();
      else if (key == "seed")
        cfg.seed = value.get<uint64_t>();
      else if (key == "checkpoint_interval")
        cfg.checkpoint_interval = value.get<int>();
      else if (key == "manifest")
        cfg.manifest = value.get<std::string>();
      else if (key == "synthetic_n")
        cfg.synthetic_n = value.get<int>();
      else if (key == "noise_side")
        cfg.noise_side = value.get<int>();
      else if (key == "unet_base")
        cfg.unet_base = value.get<int>();
      else if (key == "freeze_g")
        cfg.freeze_g = value.get<bool>();
      else
        throw std::runtime_error("unknown key");
    } catch (const json::exception& e) {
      throw std::runtime_error("config: key '" + key + "': " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("config: key '" + key + "': " + e.what());
    }
  }
  if (cfg.resolution < 8 || cfg.resolution % 8 != 0)
    throw std::runtime_error("config: resolution must be a positive multiple of 8");
  if (cfg.epochs < 0) throw std::runtime_error("config: epochs must be >= 0");
  if (cfg.batch != 1) throw std::runtime_error("config: only batch 1 is supported");
  if (!(cfg.crop_area > 0.0 && cfg.crop_area <= 1.0))
    throw std::runtime_error("config: crop_area must lie in (0,1]");
  if (cfg.lr <= 0.0) throw std::runtime_error("config: lr must be positive");
  if (cfg.lambda_l1 < 0.0) throw std::runtime_error("config: lambda_l1 must be >= 0");
  if (cfg.manifest.empty() && cfg.synthetic_n < 1)
    throw std::runtime_error("config: need a manifest or synthetic_n >= 1");
  (void)has_stage;
  return {cfg, stage};
}

TrainResult train_mask_gan(const TrainConfig& cfg, const std::string& out_dir,
                           const std::string& resume_path) {
  return run_training(cfg, Stage::mask, out_dir, resume_path);
}

TrainResult train_cgan(const TrainConfig& cfg, const std::string& out_dir,
                       const std::string& resume_path) {
  return run_training(cfg, Stage::em, out_dir, resume_path);
}

ModelBundle unpack_checkpoint(const Checkpoint& ckpt) {
  auto [cfg, stage] = train_config_from_json(ckpt.config_text, TrainConfig{});
  ModelBundle b{stage, cfg, build_gen(cfg, stage), build_disc(cfg, stage), {}, {}, 0};
  SeededRng init_g(SeededRng::derive(cfg.seed, kLaneInitG));
  SeededRng init_d(SeededRng::derive(cfg.seed, kLaneInitD));
  b.gen_params = ModelParams::init(b.gen, init_g);
  b.disc_params = ModelParams::init(b.disc, init_d);
  load_params_from(ckpt, "g", b.gen_params);
  load_params_from(ckpt, "d", b.disc_params);
  auto ms = ckpt.tensors.find("meta.step");
  if (ms != ckpt.tensors.end()) b.step = static_cast<int64_t>(ms->second.item());
  return b;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_loss_csv(const std::string& path, const std::vector<StepLog>& log) {
  CsvWriter w(path);
  for (const auto& l : log) w.row(l);
}

}  // namespace spgan
