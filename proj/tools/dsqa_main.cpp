// dsqa command line: train a denoiser on clean audio, score utterances by
// probability-flow log-likelihood, validate the solver against closed-form
// distributions, and run corruption sweeps.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dsqa/checkpoint.hpp"
#include "dsqa/eval.hpp"
#include "dsqa/likelihood.hpp"
#include "dsqa/oracles.hpp"
#include "dsqa/synthetic.hpp"
#include "dsqa/trainer.hpp"
#include "dsqa/util.hpp"
#include "dsqa/wav.hpp"

namespace fs = std::filesystem;
using namespace dsqa;

namespace {

std::vector<fs::path> list_wavs(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::runtime_error("no .wav files in " + dir.string());
  return paths;
}

std::vector<NamedWaveform> load_corpus(const fs::path& dir) {
  std::vector<NamedWaveform> corpus;
  for (const auto& path : list_wavs(dir))
    corpus.push_back({path.stem().string(), read_wav(path)});
  return corpus;
}

std::vector<Eigen::Index> parse_hidden(const std::string& text) {
  std::vector<Eigen::Index> dims;
  std::string token;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ',') {
      if (!token.empty()) dims.push_back(std::stoll(token));
      token.clear();
    } else {
      token.push_back(text[i]);
    }
  }
  return dims;
}

TraceMode make_trace_mode(const std::string& kind, int probes, std::uint64_t probe_seed) {
  if (kind == "exact") return TraceMode::exact();
  if (kind == "hutchinson") return TraceMode::hutchinson(probes, probe_seed);
  throw std::runtime_error("unknown trace mode: " + kind);
}

struct TrainArgs {
  std::string data_dir;
  bool synthetic = false;
  int synthetic_count = 200;
  double synthetic_duration = 1.05;
  std::string out;
  std::string train_log;
  std::string hidden = "512,512,512";
  Eigen::Index embed_dim = 64;
  Eigen::Index patch_frames = 64;
  long long samples = 200000;
  long long steps = 0;  // when > 0, overrides samples
  int batch = 32;
  double lr = 1e-3;
  int warmup = 1000;
  double ema = 0.999;
  double sigma_data = 0.5;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& args) {
  std::vector<Waveform> corpus;
  if (args.synthetic) {
    corpus = synth_clean_corpus(derive_seed(args.seed, 100), args.synthetic_count,
                                args.synthetic_duration);
  } else {
    for (const auto& path : list_wavs(args.data_dir)) corpus.push_back(read_wav(path));
  }

  const FeatureConfig feature;
  const auto [mean, std_dev] = compute_dataset_stats(corpus, feature);
  std::cout << "dataset stats: mean=" << format_double(mean)
            << " std=" << format_double(std_dev) << " over " << corpus.size() << " files\n";

  std::vector<Eigen::MatrixXd> mels;
  mels.reserve(corpus.size());
  for (const auto& w : corpus)
    mels.push_back(waveform_to_features(w, mean, std_dev, feature).values);

  NetworkArch arch;
  arch.in_dim = feature.n_mels * args.patch_frames;
  arch.hidden_dims = parse_hidden(args.hidden);
  arch.embed_dim = args.embed_dim;

  TrainConfig config;
  config.batch_size = args.batch;
  config.total_samples = args.steps > 0 ? args.steps * args.batch : args.samples;
  config.lr = args.lr;
  config.warmup_steps = args.warmup;
  config.ema_rate = args.ema;
  config.seed = args.seed;
  config.sigma_data = args.sigma_data;

  MelPatchSource source(std::move(mels), args.patch_frames);

  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (!args.train_log.empty()) {
    log_file.open(args.train_log, std::ios::binary);
    if (!log_file) throw std::runtime_error("cannot open train log: " + args.train_log);
    log = &log_file;
  }

  TrainResult trained = train(source, arch, config, log);
  trained.params.feature_mean = mean;
  trained.params.feature_std = std_dev;

  ModelBundle bundle{std::move(trained.params), NoiseSchedule{}, feature};
  save_checkpoint(args.out, bundle);
  std::cout << "final smoothed loss: " << format_double(trained.final_smoothed_loss) << " ("
            << trained.steps << " steps)\n";
  std::cout << "checkpoint written to " << args.out << "\n";
  return 0;
}

struct ScoreArgs {
  std::string model;
  std::vector<std::string> files;
  int steps = 0;
  std::string trace = "hutchinson";
  int probes = 1;
  std::uint64_t probe_seed = 0;
  std::string csv;
  std::string dump_dir;
  int threads = 0;
};

int cmd_score(const ScoreArgs& args) {
  ModelBundle model = load_checkpoint(args.model);
  if (args.steps > 0) model.schedule.num_steps = args.steps;
  const TraceMode mode = make_trace_mode(args.trace, args.probes, args.probe_seed);

  struct Row {
    std::string id;
    double score = 0.0;
    bool ok = false;
    std::string error;
  };
  std::vector<Row> rows(args.files.size());
  parallel_for(args.files.size(), args.threads, [&](std::size_t i) {
    const fs::path path = args.files[i];
    rows[i].id = path.stem().string();
    try {
      const Waveform w = read_wav(path);
      const MelSpectrogram feats = waveform_to_features(w, model.params.feature_mean,
                                                        model.params.feature_std, model.feature);
      if (!args.dump_dir.empty())
        write_mel_file(fs::path(args.dump_dir) / (rows[i].id + ".mel"), feats.values);
      rows[i].score = score_utterance(model.params, feats, model.schedule, mode);
      rows[i].ok = true;
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });

  std::ofstream csv;
  if (!args.csv.empty()) {
    csv.open(args.csv, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open csv: " + args.csv);
    csv << "utterance_id,score\n";
  }
  int failures = 0;
  for (const auto& row : rows) {
    if (row.ok) {
      std::cout << row.id << "\t" << format_double(row.score) << "\n";
      if (csv.is_open()) csv << row.id << ',' << format_double(row.score) << '\n';
    } else {
      std::cerr << row.id << ": error: " << row.error << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

struct VerifyArgs {
  std::string dist = "gaussian";
  Eigen::Index dim = 8;
  int points = 100;
  int steps = 32;
  std::uint64_t seed = 0;
};

int cmd_verify_oracle(const VerifyArgs& args) {
  GaussianMixture gmm;
  double tolerance = 0.0;
  if (args.dist == "gaussian") {
    gmm = GaussianMixture::isotropic(args.dim, 1.0);
    tolerance = 1e-3;
  } else if (args.dist == "gmm") {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(args.dim);
    mean[0] = 1.5;
    if (args.dim > 1) mean[1] = 0.75;
    gmm = GaussianMixture::symmetric_pair(mean, 0.5);
    tolerance = 5e-3;
  } else {
    throw std::runtime_error("unknown distribution: " + args.dist);
  }

  NoiseSchedule schedule;
  schedule.num_steps = args.steps;
  OracleDriftField field(gmm);

  // Points come in +/- pairs from the mixture itself.
  SeededRng rng(args.seed);
  double max_err = 0.0;
  double max_asym = 0.0;
  for (int p = 0; p < args.points; ++p) {
    const Eigen::Index comp =
        static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(gmm.components()));
    const Eigen::VectorXd x =
        gmm.means.col(comp) + sample_gaussian(rng, args.dim, gmm.component_std);

    auto per_dim_error = [&](const Eigen::VectorXd& point) {
      const LikelihoodResult r =
          compute_log_likelihood(field, point, schedule, TraceMode::exact());
      const double analytic = oracle_log_density(gmm, point);
      return std::abs(r.log_p - analytic) / static_cast<double>(args.dim);
    };
    const double err = per_dim_error(x);
    max_err = std::max(max_err, err);
    if (args.dist == "gmm") max_asym = std::max(max_asym, std::abs(err - per_dim_error(-x)));
  }

  const bool pass = max_err <= tolerance;
  std::cout << "dist=" << args.dist << " dim=" << args.dim << " points=" << args.points
            << " steps=" << args.steps << "\n";
  std::cout << "max |ode - analytic| = " << format_double(max_err)
            << " nats/dim (tolerance " << format_double(tolerance) << ")\n";
  if (args.dist == "gmm")
    std::cout << "mirror-point error asymmetry: " << format_double(max_asym) << "\n";
  std::cout << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

struct EvalArgs {
  std::string model;
  std::string clean_dir;
  std::string noise = "white";
  std::vector<double> snrs{-10, -5, 0, 5, 10, 20};
  std::string out_prefix;
  int bins = 30;
  int steps = 0;
  std::string trace = "hutchinson";
  int probes = 1;
  std::uint64_t probe_seed = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_eval(const EvalArgs& args) {
  ModelBundle model = load_checkpoint(args.model);
  if (args.steps > 0) model.schedule.num_steps = args.steps;
  const TraceMode mode = make_trace_mode(args.trace, args.probes, args.probe_seed);

  const std::vector<NamedWaveform> clean = load_corpus(args.clean_dir);
  std::vector<Waveform> noise_corpus;
  if (args.noise != "white")
    for (const auto& path : list_wavs(args.noise)) noise_corpus.push_back(read_wav(path));

  SweepConfig sweep;
  sweep.snr_grid = args.snrs;
  sweep.seed = args.seed;
  sweep.threads = args.threads;

  const SweepResult result = run_corruption_sweep(model, clean, noise_corpus, sweep, mode);

  const fs::path records_path = args.out_prefix + "_records.csv";
  const fs::path correlations_path = args.out_prefix + "_correlations.csv";
  const fs::path histogram_path = args.out_prefix + "_histogram.csv";
  write_records_csv(records_path, result.records);
  write_correlations_csv(correlations_path, result.records);
  emit_histogram_csv(histogram_path, result.records, args.bins);

  // Per-condition means, in first-appearance order.
  std::vector<std::string> conditions;
  std::map<std::string, std::pair<double, int>> sums;
  for (const auto& r : result.records) {
    if (!sums.count(r.condition)) conditions.push_back(r.condition);
    sums[r.condition].first += r.score;
    sums[r.condition].second += 1;
  }
  std::cout << "records: " << result.records.size() << " (" << result.failures.size()
            << " failed), clipped samples: " << result.clipped_samples << "\n";
  for (const auto& c : conditions)
    std::cout << "mean score [" << c << "] = " << format_double(sums[c].first / sums[c].second)
              << " over " << sums[c].second << "\n";
  std::cout << "wrote " << records_path.string() << ", " << correlations_path.string() << ", "
            << histogram_path.string() << "\n";

  for (const auto& f : result.failures)
    std::cerr << f.utterance_id << " [" << f.condition << "]: " << f.message << "\n";
  return result.failures.empty() ? 0 : 1;
}

struct SynthArgs {
  std::string out_dir;
  int count = 200;
  double duration = 1.05;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args) {
  fs::create_directories(args.out_dir);
  for (int i = 0; i < args.count; ++i) {
    const Waveform w = synth_harmonic_utterance(
        derive_seed(args.seed, static_cast<std::uint64_t>(i)), args.duration);
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%05d.wav", i);
    write_wav(fs::path(args.out_dir) / name, w);
  }
  std::cout << "wrote " << args.count << " files to " << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech quality scoring via diffusion log-likelihood"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a denoiser on clean audio");
  auto* data_opt = train_cmd->add_option("--data", train_args.data_dir, "directory of clean WAVs");
  auto* synth_opt =
      train_cmd->add_flag("--synthetic", train_args.synthetic, "train on a synthetic corpus");
  data_opt->excludes(synth_opt);
  train_cmd->add_option("--count", train_args.synthetic_count, "synthetic corpus size");
  train_cmd->add_option("--duration", train_args.synthetic_duration,
                        "synthetic utterance length in seconds");
  train_cmd->add_option("--out", train_args.out, "checkpoint output path")->required();
  train_cmd->add_option("--train-log", train_args.train_log, "training log CSV path");
  train_cmd->add_option("--hidden", train_args.hidden, "hidden widths, comma separated");
  train_cmd->add_option("--embed-dim", train_args.embed_dim, "noise embedding width");
  train_cmd->add_option("--patch-frames", train_args.patch_frames, "frames per training patch");
  train_cmd->add_option("--samples", train_args.samples, "total training patches");
  train_cmd->add_option("--steps", train_args.steps, "optimizer steps (overrides --samples)");
  train_cmd->add_option("--batch", train_args.batch, "batch size");
  train_cmd->add_option("--lr", train_args.lr, "learning rate");
  train_cmd->add_option("--warmup", train_args.warmup, "linear warmup steps");
  train_cmd->add_option("--ema", train_args.ema, "EMA rate");
  train_cmd->add_option("--sigma-data", train_args.sigma_data, "data std for preconditioning");
  train_cmd->add_option("--seed", train_args.seed, "master seed");

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "score WAV files with a trained model");
  score_cmd->add_option("--model", score_args.model, "checkpoint path")->required();
  score_cmd->add_option("files", score_args.files, "WAV files to score")->required();
  score_cmd->add_option("--steps", score_args.steps, "override solver steps");
  score_cmd->add_option("--trace", score_args.trace, "trace estimator: hutchinson|exact");
  score_cmd->add_option("--probes", score_args.probes, "Hutchinson probe count");
  score_cmd->add_option("--probe-seed", score_args.probe_seed, "Hutchinson probe seed");
  score_cmd->add_option("--csv", score_args.csv, "also write scores to this CSV");
  score_cmd->add_option("--dump-features", score_args.dump_dir,
                        "write normalized log-mel dumps (.mel) to this directory");
  score_cmd->add_option("--threads", score_args.threads, "worker threads (0 = auto)");

  VerifyArgs verify_args;
  auto* verify_cmd =
      app.add_subcommand("verify-oracle", "check the solver against closed-form densities");
  verify_cmd->add_option("--dist", verify_args.dist, "gaussian|gmm")->required();
  verify_cmd->add_option("--dim", verify_args.dim, "state dimension");
  verify_cmd->add_option("--points", verify_args.points, "test point count");
  verify_cmd->add_option("--steps", verify_args.steps, "solver steps");
  verify_cmd->add_option("--seed", verify_args.seed, "test point seed");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "corruption sweep with correlation CSVs");
  eval_cmd->add_option("--model", eval_args.model, "checkpoint path")->required();
  eval_cmd->add_option("--clean", eval_args.clean_dir, "directory of clean WAVs")->required();
  eval_cmd->add_option("--noise", eval_args.noise, "'white' or a directory of noise WAVs");
  eval_cmd->add_option("--snrs", eval_args.snrs, "SNR grid in dB")->delimiter(',');
  eval_cmd->add_option("--out", eval_args.out_prefix, "output CSV prefix")->required();
  eval_cmd->add_option("--bins", eval_args.bins, "histogram bin count");
  eval_cmd->add_option("--steps", eval_args.steps, "override solver steps");
  eval_cmd->add_option("--trace", eval_args.trace, "trace estimator: hutchinson|exact");
  eval_cmd->add_option("--probes", eval_args.probes, "Hutchinson probe count");
  eval_cmd->add_option("--probe-seed", eval_args.probe_seed, "Hutchinson probe seed");
  eval_cmd->add_option("--seed", eval_args.seed, "sweep seed (noise draws and crops)");
  eval_cmd->add_option("--threads", eval_args.threads, "worker threads (0 = auto)");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic clean corpus as WAV files");
  synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth_cmd->add_option("--count", synth_args.count, "number of utterances");
  synth_cmd->add_option("--duration", synth_args.duration, "utterance length in seconds");
  synth_cmd->add_option("--seed", synth_args.seed, "corpus seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) {
      if (!train_args.synthetic && train_args.data_dir.empty())
        throw CLI::RequiredError("train needs --data or --synthetic");
      return cmd_train(train_args);
    }
    if (score_cmd->parsed()) return cmd_score(score_args);
    if (verify_cmd->parsed()) return cmd_verify_oracle(verify_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (synth_cmd->parsed()) return cmd_synth(synth_args);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
