#include "dsqa/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dsqa/rng.hpp"

namespace dsqa {
namespace {

double spectral_hump(double f, double centre, double bandwidth) {
  const double d = (f - centre) / bandwidth;
  return std::exp(-0.5 * d * d);
}

}  // namespace

Waveform synth_harmonic_utterance(std::uint64_t seed, double duration_s, int sample_rate) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("synth: duration must be > 0");
  SeededRng rng(seed);
  const Eigen::Index n = static_cast<Eigen::Index>(std::llround(duration_s * sample_rate));

  const double f0 = 100.0 + 220.0 * rng.next_unit();
  const double glide = -0.12 + 0.24 * rng.next_unit();  // relative f0 drift per second
  const double tilt = 0.7 + 0.6 * rng.next_unit();      // 1/k^tilt harmonic rolloff
  const double vib_rate = 4.0 + 2.5 * rng.next_unit();
  const double vib_depth = 0.004 + 0.010 * rng.next_unit();
  const double vib_phase = 2.0 * std::numbers::pi * rng.next_unit();
  const double am_rate = 1.5 + 2.5 * rng.next_unit();
  const double am_depth = 0.10 + 0.20 * rng.next_unit();
  const double am_phase = 2.0 * std::numbers::pi * rng.next_unit();
  const double attack = 0.04 + 0.08 * rng.next_unit();
  const double release = 0.08 + 0.12 * rng.next_unit();
  const double formant1 = 300.0 + 500.0 * rng.next_unit();
  const double formant2 = 1200.0 + 1600.0 * rng.next_unit();
  const double bw1 = 120.0 + 120.0 * rng.next_unit();
  const double bw2 = 250.0 + 300.0 * rng.next_unit();
  const double peak = 0.25 * (0.8 + 0.4 * rng.next_unit());

  // Keep the top harmonic safely below the 8 kHz band edge even with glide
  // and vibrato.
  const double f0_max = f0 * (1.0 + std::abs(glide) * duration_s + vib_depth);
  const int harmonics = std::max(1, std::min(40, static_cast<int>(7600.0 / f0_max)));

  Eigen::VectorXd amp(harmonics);
  Eigen::VectorXd phase(harmonics);
  for (int k = 0; k < harmonics; ++k) {
    const double fk = f0 * (k + 1);
    amp[k] = std::pow(k + 1.0, -tilt) *
             (0.25 + spectral_hump(fk, formant1, bw1) + 0.7 * spectral_hump(fk, formant2, bw2));
    phase[k] = 2.0 * std::numbers::pi * rng.next_unit();
  }

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  const double dt = 1.0 / sample_rate;
  double base_phase = 0.0;  // integral of 2*pi*f0(t)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = i * dt;
    const double inst_f0 =
        f0 * (1.0 + glide * t) *
        (1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
    base_phase += 2.0 * std::numbers::pi * inst_f0 * dt;

    double s = 0.0;
    for (int k = 0; k < harmonics; ++k) s += amp[k] * std::sin((k + 1) * base_phase + phase[k]);

    double env = std::min({1.0, t / attack, (duration_s - t) / release});
    env = std::max(env, 0.0);
    env *= 1.0 - am_depth * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * am_rate * t + am_phase));
    w.samples[i] = env * s;
  }

  const double max_abs = w.samples.cwiseAbs().maxCoeff();
  if (max_abs > 0.0) w.samples *= peak / max_abs;
  return w;
}

std::vector<Waveform> synth_clean_corpus(std::uint64_t seed, int count, double duration_s,
                                         int sample_rate) {
  if (count < 1) throw std::invalid_argument("synth_clean_corpus: count must be >= 1");
  std::vector<Waveform> corpus;
  corpus.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    corpus.push_back(synth_harmonic_utterance(derive_seed(seed, static_cast<std::uint64_t>(i)),
                                              duration_s, sample_rate));
  return corpus;
}

Waveform synth_white_noise(std::uint64_t seed, Eigen::Index n_samples, int sample_rate) {
  SeededRng rng(seed);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = sample_gaussian(rng, n_samples, 1.0);
  return w;
}

}  // namespace dsqa
