#include "xienh/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "xienh/checkpoint.hpp"
#include "xienh/enhancer.hpp"
#include "xienh/error.hpp"
#include "xienh/io.hpp"
#include "xienh/metrics.hpp"
#include "xienh/model.hpp"
#include "xienh/rng.hpp"
#include "xienh/synth.hpp"
#include "xienh/trainer.hpp"

namespace xienh {
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string snr_label(double snr) {
  std::ostringstream s;
  s << snr;
  return s.str();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(item.find_first_not_of(" \t", used) == std::string::npos, "trailing characters");
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse '" + item + "' as a number");
    }
  }
  require(!out.empty(), "empty number list");
  return out;
}

std::vector<AudioSignal> read_all(const std::vector<fs::path>& paths) {
  std::vector<AudioSignal> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(io::read_wav(p));
  return out;
}

std::vector<fs::path> wav_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Picks a noise recording at least as long as the clean utterance and a random offset into it.
MixResult random_mix(const AudioSignal& clean, const std::vector<AudioSignal>& noise, double snr,
                     Rng& rng, std::size_t* noise_index, std::size_t* offset) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    if (noise[i].size() >= clean.size()) usable.push_back(i);
  }
  require(!usable.empty(), "no noise recording is long enough for a " +
                               std::to_string(clean.size()) + "-sample utterance");
  *noise_index = usable[rng.below(usable.size())];
  *offset = rng.below(noise[*noise_index].size() - clean.size() + 1);
  return mix_at_snr(clean, noise[*noise_index], snr, *offset);
}

struct MixOptions {
  std::string clean, noise, snrs = "0", out;
  std::uint64_t seed = 0;
};

int cmd_mix(const MixOptions& o, std::ostream& out) {
  const auto clean_paths = io::read_manifest(o.clean);
  const auto noise_paths = io::read_manifest(o.noise);
  require(!clean_paths.empty() && !noise_paths.empty(), "mix: empty manifest");
  const auto noise = read_all(noise_paths);
  const auto snrs = parse_list(o.snrs);
  const fs::path dir = o.out;
  Rng rng(o.seed);

  std::ostringstream csv;
  csv << "file,snr_db,noise,offset\n";
  for (const auto& path : clean_paths) {
    const auto clean = io::read_wav(path);
    for (double snr : snrs) {
      std::size_t ni = 0, offset = 0;
      const auto mix = random_mix(clean, noise, snr, rng, &ni, &offset);
      const std::string name = path.stem().string() + "_" + snr_label(snr) + "dB.wav";
      io::write_wav(dir / "noisy" / name, mix.noisy);
      io::write_wav(dir / "clean" / name, mix.clean);
      io::write_wav(dir / "noise" / name, mix.scaled_noise);
      csv << name << ',' << snr_label(snr) << ',' << noise_paths[ni].filename().string() << ','
          << offset << '\n';
    }
  }
  io::atomic_write_text(dir / "mix.csv", csv.str());
  out << "wrote " << clean_paths.size() * snrs.size() << " mixtures to " << dir.string() << '\n';
  return 0;
}

struct StatsOptions {
  std::string clean, noise, out, snrs = "-5,0,5,10,15";
  std::size_t max_clean = 50;
  std::uint64_t seed = 0;
};

int cmd_stats(const StatsOptions& o, std::ostream& out) {
  auto clean_paths = io::read_manifest(o.clean);
  const auto noise = read_all(io::read_manifest(o.noise));
  require(!clean_paths.empty() && !noise.empty(), "stats: empty manifest");
  const auto snrs = parse_list(o.snrs);
  Rng rng(o.seed);
  if (clean_paths.size() > o.max_clean) {
    rng.shuffle(std::span<fs::path>(clean_paths));
    clean_paths.resize(o.max_clean);
  }

  const FrameConfig cfg;
  BinMoments moments(cfg.n_bins());
  for (const auto& path : clean_paths) {
    const auto clean = io::read_wav(path);
    for (double snr : snrs) {
      std::size_t ni = 0, offset = 0;
      const auto mix = random_mix(clean, noise, snr, rng, &ni, &offset);
      moments.add(instantaneous_xi_db(stft(mix.clean, cfg), stft(mix.scaled_noise, cfg)).values);
    }
  }
  const auto stats = moments.finish();
  io::save_stats(o.out, stats);
  const double mu = std::accumulate(stats.mu.begin(), stats.mu.end(), 0.0) / stats.n_bins();
  const double sigma =
      std::accumulate(stats.sigma.begin(), stats.sigma.end(), 0.0) / stats.n_bins();
  out << "stats over " << moments.count() << " frames from " << clean_paths.size()
      << " utterances x " << snrs.size() << " SNRs: mean mu " << fmt("%.3f", mu)
      << " dB, mean sigma " << fmt("%.3f", sigma) << " dB -> " << o.out << '\n';
  return 0;
}

struct TrainOptions {
  std::string spec, clean, noise, stats, out, trace;
  int d_model = 0, d_f = 0, branches = 0, kernel = 0, max_dilation = 0;
  TrainConfig cfg;
  bool quiet = false;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  auto spec = ModelSpec::parse(o.spec);
  if (o.d_model > 0) spec.d_model = o.d_model;
  if (o.d_f > 0) spec.d_f = o.d_f;
  if (o.branches > 0) spec.n_branches = o.branches;
  if (o.kernel > 0) spec.kernel = o.kernel;
  if (o.max_dilation > 0) spec.max_dilation = o.max_dilation;
  spec.validate();

  Corpus corpus;
  corpus.clean = read_all(io::read_manifest(o.clean));
  corpus.noise = read_all(io::read_manifest(o.noise));
  const auto stats = io::load_stats(o.stats);

  out << "training " << to_string(spec.family) << ":" << spec.n_blocks << " ("
      << count_params(spec) << " parameters) on " << corpus.clean.size() << " utterances\n";
  int epoch = -1;
  double sum = 0.0;
  int batches = 0;
  auto flush = [&] {
    if (batches > 0 && !o.quiet) {
      out << "epoch " << epoch + 1 << "/" << o.cfg.epochs << " loss " << fmt("%.6f", sum / batches)
          << '\n';
    }
  };
  const auto result = train(spec, corpus, stats, o.cfg, [&](const LossRecord& r) {
    if (r.epoch != epoch) {
      flush();
      epoch = r.epoch;
      sum = 0.0;
      batches = 0;
    }
    sum += r.loss;
    ++batches;
  });
  flush();

  io::save_checkpoint(o.out, result.params, o.cfg);
  std::ostringstream csv;
  csv << "epoch,batch,loss\n";
  for (const auto& r : result.trace) csv << r.epoch << ',' << r.batch << ',' << fmt("%.9g", r.loss) << '\n';
  const std::string trace = o.trace.empty() ? o.out + ".loss.csv" : o.trace;
  io::atomic_write_text(trace, csv.str());
  out << "checkpoint -> " << o.out << ", loss trace -> " << trace << '\n';
  return 0;
}

struct EnhanceOptions {
  std::string ckpt, in, out, gain = "mmse-lsa", spectrogram;
};

int cmd_enhance(const EnhanceOptions& o, std::ostream& out) {
  const auto model = io::load_checkpoint(o.ckpt);
  const GainKind kind = parse_gain_kind(o.gain);
  const fs::path in = o.in;
  const auto inputs = fs::is_directory(in) ? wav_files(in) : std::vector<fs::path>{in};
  require(!inputs.empty(), "enhance: no .wav files in " + in.string());

  for (const auto& path : inputs) {
    EnhanceRequest req{io::read_wav(path), &model, kind};
    const auto enhanced = enhance(req);
    io::write_wav(fs::path(o.out) / path.filename(), enhanced);
    if (!o.spectrogram.empty()) {
      const fs::path dir = o.spectrogram;
      const std::string stem = path.stem().string();
      io::write_spectrogram_png(dir / (stem + "_noisy.png"), stft(req.noisy));
      io::write_spectrogram_png(dir / (stem + "_enhanced.png"), stft(enhanced));
    }
  }
  out << "enhanced " << inputs.size() << " file(s) with " << to_string(kind) << " -> " << o.out << '\n';
  return 0;
}

struct EvalOptions {
  std::string clean, noisy, enhanced, out;
};

// mix.csv rows keyed by file name: (snr_db, noise).
std::map<std::string, std::pair<std::string, std::string>> read_mix_table(const fs::path& noisy_dir) {
  std::map<std::string, std::pair<std::string, std::string>> table;
  for (const fs::path& candidate : {noisy_dir / "mix.csv", noisy_dir.parent_path() / "mix.csv"}) {
    std::ifstream in(candidate);
    if (!in) continue;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream row(line);
      std::string file, snr, noise;
      std::getline(row, file, ',');
      std::getline(row, snr, ',');
      std::getline(row, noise, ',');
      if (!file.empty()) table[file] = {snr, noise};
    }
    break;
  }
  return table;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const fs::path noisy_dir = o.noisy;
  const auto files = wav_files(noisy_dir);
  require(!files.empty(), "eval: no .wav files in " + noisy_dir.string());
  const auto table = read_mix_table(noisy_dir);

  std::ostringstream csv;
  csv << "file,snr_db,noise,seg_snr_noisy,seg_snr_enhanced,ssnr_plus\n";
  double sum_noisy = 0.0, sum_enh = 0.0, sum_plus = 0.0;
  for (const auto& path : files) {
    const std::string name = path.filename().string();
    const auto clean = io::read_wav(fs::path(o.clean) / name);
    const auto noisy = io::read_wav(path);
    const auto enhanced = io::read_wav(fs::path(o.enhanced) / name);
    require(clean.size() == noisy.size() && clean.size() == enhanced.size(),
            "eval: length mismatch for " + name);
    const double sn = seg_snr(clean, noisy);
    const double se = seg_snr(clean, enhanced);
    const double plus = se - sn;
    sum_noisy += sn;
    sum_enh += se;
    sum_plus += plus;
    const auto it = table.find(name);
    csv << name << ',' << (it != table.end() ? it->second.first : "") << ','
        << (it != table.end() ? it->second.second : "") << ',' << fmt("%.6f", sn) << ','
        << fmt("%.6f", se) << ',' << fmt("%.6f", plus) << '\n';
  }
  const double n = static_cast<double>(files.size());
  csv << "mean,,," << fmt("%.6f", sum_noisy / n) << ',' << fmt("%.6f", sum_enh / n) << ','
      << fmt("%.6f", sum_plus / n) << '\n';
  io::atomic_write_text(o.out, csv.str());
  out << files.size() << " file(s): mean SSNR+ " << fmt("%.3f", sum_plus / n) << " dB -> " << o.out
      << '\n';
  return 0;
}

struct InfoOptions {
  std::string ckpt, spec;
};

int cmd_info(const InfoOptions& o, std::ostream& out) {
  require(o.ckpt.empty() != o.spec.empty(), "info: give exactly one of --ckpt or --spec");
  std::optional<ModelParams> model;
  ModelSpec spec;
  if (!o.ckpt.empty()) {
    model = io::load_checkpoint(o.ckpt);
    spec = model->spec;
  } else {
    spec = ModelSpec::parse(o.spec);
  }
  out << "family: " << to_string(spec.family) << '\n'
      << "blocks: " << spec.n_blocks << '\n'
      << "d_model: " << spec.d_model << '\n'
      << "d_f: " << spec.d_f << '\n'
      << "kernel: " << spec.kernel << '\n'
      << "max dilation: " << spec.max_dilation << '\n';
  if (spec.family == Family::MbTcn) out << "branches: " << spec.n_branches << '\n';
  out << "parameters: " << count_params(spec) << '\n'
      << "receptive field: " << receptive_field_frames(spec) << " frames ("
      << fmt("%.3f", receptive_field_seconds(spec)) << " s)\n";
  if (model) out << "stats bins: " << model->stats.n_bins() << '\n';
  return 0;
}

struct SynthOptions {
  std::string out;
  int clean = 5, noise = 2;
  double seconds = 2.0, noise_seconds = 8.0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  require(o.clean >= 1 && o.noise >= 1, "synth: need at least one clean and one noise file");
  const fs::path dir = o.out;
  std::string clean_list, noise_list;
  for (int i = 0; i < o.clean; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "utt%02d.wav", i);
    io::write_wav(dir / "clean" / name, synth::speech_like(o.seconds, o.seed + i));
    clean_list += std::string("clean/") + name + '\n';
  }
  for (int i = 0; i < o.noise; ++i) {
    char name[32];
    const bool white = i % 2 == 0;
    std::snprintf(name, sizeof name, "%s%02d.wav", white ? "white" : "colored", i);
    const std::uint64_t seed = o.seed + 1000 + i;
    io::write_wav(dir / "noise" / name, white ? synth::white_noise(o.noise_seconds, seed)
                                              : synth::colored_noise(o.noise_seconds, seed));
    noise_list += std::string("noise/") + name + '\n';
  }
  io::atomic_write_text(dir / "clean.txt", clean_list);
  io::atomic_write_text(dir / "noise.txt", noise_list);
  out << "wrote " << o.clean << " clean and " << o.noise << " noise files to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep Xi speech enhancement"};
  app.require_subcommand(1);

  MixOptions mix;
  auto* c_mix = app.add_subcommand("mix", "Mix clean utterances with noise at given SNRs");
  c_mix->add_option("--clean", mix.clean, "Clean manifest")->required();
  c_mix->add_option("--noise", mix.noise, "Noise manifest")->required();
  c_mix->add_option("--snr-db", mix.snrs, "SNR in dB, or a comma-separated list")->required();
  c_mix->add_option("--out", mix.out, "Output directory")->required();
  c_mix->add_option("--seed", mix.seed, "Random seed");

  StatsOptions stats;
  auto* c_stats = app.add_subcommand("stats", "Estimate per-bin xi_dB mean and std");
  c_stats->add_option("--clean", stats.clean, "Clean manifest")->required();
  c_stats->add_option("--noise", stats.noise, "Noise manifest")->required();
  c_stats->add_option("--out", stats.out, "Output stats file")->required();
  c_stats->add_option("--snrs", stats.snrs, "Comma-separated SNRs in dB")->capture_default_str();
  c_stats->add_option("--max-clean", stats.max_clean, "Clean utterances sampled")->capture_default_str();
  c_stats->add_option("--seed", stats.seed, "Random seed");

  TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "Train a network on mixtures synthesised on the fly");
  c_train->add_option("--spec", tr.spec, "FAMILY:N, e.g. mb-tcn:12")->required();
  c_train->add_option("--clean", tr.clean, "Clean manifest")->required();
  c_train->add_option("--noise", tr.noise, "Noise manifest")->required();
  c_train->add_option("--stats", tr.stats, "Stats file from `stats`")->required();
  c_train->add_option("--out", tr.out, "Output checkpoint")->required();
  c_train->add_option("--trace", tr.trace, "Loss trace CSV (default: OUT.loss.csv)");
  c_train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c_train->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  c_train->add_option("--lr", tr.cfg.lr)->capture_default_str();
  c_train->add_option("--grad-clip", tr.cfg.grad_clip)->capture_default_str();
  c_train->add_option("--snr-min", tr.cfg.snr_min_db)->capture_default_str();
  c_train->add_option("--snr-max", tr.cfg.snr_max_db)->capture_default_str();
  c_train->add_option("--snr-step", tr.cfg.snr_step_db)->capture_default_str();
  c_train->add_option("--seed", tr.cfg.seed)->capture_default_str();
  c_train->add_option("--d-model", tr.d_model, "Override residual width");
  c_train->add_option("--d-f", tr.d_f, "Override branch/bottleneck width");
  c_train->add_option("--branches", tr.branches, "Override MB-TCN branch count");
  c_train->add_option("--kernel", tr.kernel, "Override kernel size");
  c_train->add_option("--max-dilation", tr.max_dilation, "Override maximum dilation");
  c_train->add_flag("--quiet", tr.quiet, "No per-epoch output");

  EnhanceOptions en;
  auto* c_enh = app.add_subcommand("enhance", "Enhance a wav file or a directory of wav files");
  c_enh->add_option("--ckpt", en.ckpt, "Checkpoint")->required();
  c_enh->add_option("--in", en.in, "Input wav or directory")->required();
  c_enh->add_option("--out", en.out, "Output directory")->required();
  c_enh->add_option("--gain", en.gain, "Gain function")
      ->check(CLI::IsMember({"srwf", "mmse-stsa", "mmse-lsa"}))
      ->capture_default_str();
  c_enh->add_option("--spectrogram", en.spectrogram, "Also write PNG spectrograms here");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "Segmental SNR report");
  c_eval->add_option("--clean", ev.clean, "Clean directory")->required();
  c_eval->add_option("--noisy", ev.noisy, "Noisy directory")->required();
  c_eval->add_option("--enhanced", ev.enhanced, "Enhanced directory")->required();
  c_eval->add_option("--out", ev.out, "Report CSV")->required();

  InfoOptions info;
  auto* c_info = app.add_subcommand("info", "Describe a checkpoint or a model spec");
  c_info->add_option("--ckpt", info.ckpt, "Checkpoint");
  c_info->add_option("--spec", info.spec, "FAMILY:N");

  SynthOptions sy;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic speech-like and noise corpus");
  c_synth->add_option("--out", sy.out, "Output directory")->required();
  c_synth->add_option("--clean", sy.clean, "Number of utterances")->capture_default_str();
  c_synth->add_option("--noise", sy.noise, "Number of noise files")->capture_default_str();
  c_synth->add_option("--seconds", sy.seconds, "Utterance length")->capture_default_str();
  c_synth->add_option("--noise-seconds", sy.noise_seconds, "Noise length")->capture_default_str();
  c_synth->add_option("--seed", sy.seed, "Random seed");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 2;
  }

  try {
    if (c_mix->parsed()) return cmd_mix(mix, out);
    if (c_stats->parsed()) return cmd_stats(stats, out);
    if (c_train->parsed()) return cmd_train(tr, out);
    if (c_enh->parsed()) return cmd_enhance(en, out);
    if (c_eval->parsed()) return cmd_eval(ev, out);
    if (c_info->parsed()) return cmd_info(info, out);
    if (c_synth->parsed()) return cmd_synth(sy, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace xienh
