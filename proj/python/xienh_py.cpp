#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "xienh/checkpoint.hpp"
#include "xienh/cli.hpp"
#include "xienh/enhancer.hpp"
#include "xienh/io.hpp"
#include "xienh/metrics.hpp"
#include "xienh/synth.hpp"

namespace py = pybind11;
using namespace xienh;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using CArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

AudioSignal to_signal(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D signal");
  return {{a.data(), a.data() + a.size()}, kSampleRate};
}

Array to_array(const AudioSignal& s) {
  Array out(static_cast<py::ssize_t>(s.size()));
  std::copy(s.samples.begin(), s.samples.end(), out.mutable_data());
  return out;
}

// Elementwise over two same-shaped arrays.
template <typename Fn>
Array zip(const Array& a, const Array& b, Fn fn) {
  if (a.size() != b.size()) throw py::value_error("array sizes differ");
  Array out(std::vector<py::ssize_t>(a.shape(), a.shape() + a.ndim()));
  auto* o = out.mutable_data();
  for (py::ssize_t i = 0; i < a.size(); ++i) o[i] = fn(a.data()[i], b.data()[i]);
  return out;
}

class Model {
 public:
  explicit Model(const std::filesystem::path& path) : params_(io::load_checkpoint(path)) {}

  Array enhance(const Array& noisy, const std::string& gain) const {
    const auto kind = parse_gain_kind(gain);
    AudioSignal out;
    {
      py::gil_scoped_release release;
      out = xienh::enhance({to_signal(noisy), &params_, kind});
    }
    return to_array(out);
  }

  py::dict info() const {
    const auto& s = params_.spec;
    py::dict d;
    d["family"] = to_string(s.family);
    d["blocks"] = s.n_blocks;
    d["d_model"] = s.d_model;
    d["d_f"] = s.d_f;
    d["kernel"] = s.kernel;
    d["max_dilation"] = s.max_dilation;
    d["branches"] = s.n_branches;
    d["parameters"] = count_params(s);
    d["receptive_field_frames"] = receptive_field_frames(s);
    return d;
  }

 private:
  ModelParams params_;
};

}  // namespace

PYBIND11_MODULE(_xienh, m) {
  m.doc() = "Deep Xi MB-TCN speech enhancement engine.";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<UnsupportedFormat>(m, "UnsupportedFormat", PyExc_ValueError);
  py::register_exception<CorruptCheckpoint>(m, "CorruptCheckpoint", PyExc_ValueError);

  m.def("hamming_window", &hamming_window, py::arg("n"));

  m.def(
      "stft",
      [](const Array& x) {
        const auto s = stft(to_signal(x));
        CArray out({s.frames, s.bins});
        std::copy(s.coeffs.begin(), s.coeffs.end(), out.mutable_data());
        return out;
      },
      py::arg("signal"), "(frames, 257) complex STFT, 32 ms periodic Hamming frames, 16 ms shift.");

  m.def(
      "istft",
      [](const CArray& spec, std::optional<std::size_t> length) {
        if (spec.ndim() != 2) throw py::value_error("expected (frames, bins)");
        Spectrogram s;
        s.frames = static_cast<std::size_t>(spec.shape(0));
        s.bins = static_cast<std::size_t>(spec.shape(1));
        s.coeffs.assign(spec.data(), spec.data() + spec.size());
        s.signal_length = length;
        return to_array(istft(s));
      },
      py::arg("spec"), py::arg("length") = py::none());

  m.def(
      "gain",
      [](const std::string& kind, const Array& xi, const Array& gamma) {
        const auto k = parse_gain_kind(kind);
        return zip(xi, gamma, [k](double a, double b) { return gain_value(k, a, b); });
      },
      py::arg("kind"), py::arg("xi"), py::arg("gamma"));

  m.def(
      "map_xi",
      [](const Array& xi_db, double mu, double sigma) {
        return zip(xi_db, xi_db, [=](double v, double) { return map_xi_value(v, mu, sigma); });
      },
      py::arg("xi_db"), py::arg("mu"), py::arg("sigma"));
  m.def(
      "unmap_xi",
      [](const Array& mapped, double mu, double sigma) {
        return zip(mapped, mapped, [=](double v, double) { return unmap_xi_db_value(v, mu, sigma); });
      },
      py::arg("mapped"), py::arg("mu"), py::arg("sigma"), "Inverse of map_xi, in dB.");

  m.def("dilation_for_block", &dilation_for_block, py::arg("n"), py::arg("max_dilation") = 16);
  m.def(
      "receptive_field_frames", [](const std::string& spec) { return receptive_field_frames(ModelSpec::parse(spec)); },
      py::arg("spec"));
  m.def(
      "count_params", [](const std::string& spec) { return count_params(ModelSpec::parse(spec)); }, py::arg("spec"));

  m.def(
      "seg_snr", [](const Array& clean, const Array& test) { return seg_snr(to_signal(clean), to_signal(test)); },
      py::arg("clean"), py::arg("test"));
  m.def(
      "ssnr_improvement",
      [](const Array& clean, const Array& noisy, const Array& enhanced) {
        return ssnr_improvement(to_signal(clean), to_signal(noisy), to_signal(enhanced));
      },
      py::arg("clean"), py::arg("noisy"), py::arg("enhanced"));
  m.def(
      "enhance_oracle",
      [](const Array& noisy, const Array& clean, const Array& noise, const std::string& gain) {
        return to_array(enhance_oracle(to_signal(noisy), to_signal(clean), to_signal(noise), parse_gain_kind(gain)));
      },
      py::arg("noisy"), py::arg("clean"), py::arg("noise"), py::arg("gain") = "mmse-lsa");

  m.def(
      "speech_like", [](double seconds, std::uint64_t seed) { return to_array(synth::speech_like(seconds, seed)); },
      py::arg("seconds"), py::arg("seed") = 0);
  m.def(
      "white_noise",
      [](double seconds, std::uint64_t seed, double stddev) { return to_array(synth::white_noise(seconds, seed, stddev)); },
      py::arg("seconds"), py::arg("seed") = 0, py::arg("stddev") = 0.1);

  m.def(
      "read_wav", [](const std::filesystem::path& p) { return to_array(io::read_wav(p)); }, py::arg("path"));
  m.def(
      "write_wav", [](const std::filesystem::path& p, const Array& x) { io::write_wav(p, to_signal(x)); },
      py::arg("path"), py::arg("signal"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "xienh");
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (exit code, stdout, stderr).");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def("enhance", &Model::enhance, py::arg("noisy"), py::arg("gain") = "mmse-lsa")
      .def("info", &Model::info);
}
