// Copyright 2026 The psel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "psel/io.h"

#include <bit>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "psel/error.h"

namespace psel {

namespace {

constexpr std::size_t kPreamble = 6;
// Guards allocations driven by corrupt headers.
constexpr std::int64_t kMaxExtent = std::int64_t{1} << 31;

class Writer {
 public:
  Writer(const char* magic, std::uint8_t kind) {
    out_.insert(out_.end(), magic, magic + 4);
    out_.push_back(kFormatVersion);
    out_.push_back(kind);
  }

  void word(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void integer(std::int64_t v) { word(static_cast<std::uint64_t>(v)); }
  void real(double v) { word(std::bit_cast<std::uint64_t>(v)); }

  void matrix(const Matrix& m) {
    integer(m.rows());
    integer(m.cols());
    for (long r = 0; r < m.rows(); ++r)
      for (long c = 0; c < m.cols(); ++c) real(m(r, c));
  }
  void vector(const Vector& v) {
    integer(v.size());
    for (long i = 0; i < v.size(); ++i) real(v(i));
  }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* magic, const char* what) : bytes_(bytes), what_(what) {
    PSEL_ENFORCE(bytes.size() >= kPreamble && std::equal(magic, magic + 4, bytes.begin()), kIo,
                 what << ": bad magic, expected '" << magic << "'");
    PSEL_ENFORCE(bytes[4] == kFormatVersion, kIo,
                 what << ": unsupported version " << int{bytes[4]} << " (expected " << int{kFormatVersion} << ")");
    PSEL_ENFORCE((bytes.size() - kPreamble) % 8 == 0, kIo, what << ": body is not a whole number of words");
    pos_ = kPreamble;
  }

  std::uint8_t kind() const { return bytes_[5]; }

  std::uint64_t word() {
    PSEL_ENFORCE(pos_ + 8 <= bytes_.size(), kIo, what_ << ": truncated at byte " << pos_);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t integer() { return static_cast<std::int64_t>(word()); }
  std::int64_t extent(const char* field) {
    const std::int64_t v = integer();
    PSEL_ENFORCE(v >= 0 && v < kMaxExtent, kIo, what_ << ": " << field << " = " << v << " out of range");
    return v;
  }
  int small(const char* field) { return static_cast<int>(extent(field)); }
  double real() { return std::bit_cast<double>(word()); }

  Matrix matrix() {
    const std::int64_t rows = extent("rows"), cols = extent("cols");
    PSEL_ENFORCE(rows * cols <= remaining_words(), kIo, what_ << ": matrix overruns the file");
    Matrix m(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) m(r, c) = real();
    return m;
  }
  Vector vector() {
    const std::int64_t n = extent("length");
    PSEL_ENFORCE(n <= remaining_words(), kIo, what_ << ": vector overruns the file");
    Vector v(n);
    for (long i = 0; i < n; ++i) v(i) = real();
    return v;
  }

  std::int64_t remaining_words() const { return static_cast<std::int64_t>((bytes_.size() - pos_) / 8); }
  void finish() const {
    PSEL_ENFORCE(pos_ == bytes_.size(), kIo, what_ << ": " << bytes_.size() - pos_ << " trailing bytes");
  }

 private:
  std::span<const std::uint8_t> bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

void write_config(Writer& w, const TransformerConfig& c) {
  w.integer(c.layers);
  w.integer(c.heads);
  w.integer(c.dim);
  w.integer(c.head_dim);
  w.integer(c.seq_len);
  w.integer(c.classes);
  w.real(c.mask_value);
  w.integer(c.ffn_dim);
  w.integer(c.vocab);
  w.real(c.ln_eps);
}

TransformerConfig read_config(Reader& r) {
  TransformerConfig c;
  c.layers = r.small("layers");
  c.heads = r.small("heads");
  c.dim = r.small("dim");
  c.head_dim = r.small("head_dim");
  c.seq_len = r.small("seq_len");
  c.classes = r.small("classes");
  c.mask_value = r.real();
  c.ffn_dim = r.small("ffn_dim");
  c.vocab = r.small("vocab");
  c.ln_eps = r.real();
  return c;
}

}  // namespace

Bytes encode_model(const TransformerWeights& w) {
  w.validate();
  Writer out("SFMT", static_cast<std::uint8_t>(ContainerKind::kTransformer));
  write_config(out, w.config);
  for (const LayerWeights& l : w.layers) {
    out.matrix(l.wq);
    out.matrix(l.wk);
    out.matrix(l.wv);
    out.matrix(l.wo);
    out.vector(l.ln_gamma);
    out.vector(l.ln_beta);
    if (w.config.ffn_dim > 0) {
      out.matrix(l.ffn_w1);
      out.vector(l.ffn_b1);
      out.matrix(l.ffn_w2);
      out.vector(l.ffn_b2);
      out.vector(l.ln2_gamma);
      out.vector(l.ln2_beta);
    }
  }
  out.matrix(w.classifier);
  out.vector(w.classifier_bias);
  if (w.config.vocab > 0) out.matrix(w.embedding);
  return out.take();
}

TransformerWeights decode_model(std::span<const std::uint8_t> bytes) {
  Reader in(bytes, "SFMT", "model file");
  PSEL_ENFORCE(in.kind() == static_cast<std::uint8_t>(ContainerKind::kTransformer), kIo,
               "model file: container holds kind " << int{in.kind()} << ", not a transformer");
  TransformerWeights w;
  w.config = read_config(in);
  w.config.validate();
  for (int i = 0; i < w.config.layers; ++i) {
    LayerWeights l;
    l.wq = in.matrix();
    l.wk = in.matrix();
    l.wv = in.matrix();
    l.wo = in.matrix();
    l.ln_gamma = in.vector();
    l.ln_beta = in.vector();
    if (w.config.ffn_dim > 0) {
      l.ffn_w1 = in.matrix();
      l.ffn_b1 = in.vector();
      l.ffn_w2 = in.matrix();
      l.ffn_b2 = in.vector();
      l.ln2_gamma = in.vector();
      l.ln2_beta = in.vector();
    }
    w.layers.push_back(std::move(l));
  }
  w.classifier = in.matrix();
  w.classifier_bias = in.vector();
  if (w.config.vocab > 0) w.embedding = in.matrix();
  in.finish();
  w.validate();
  return w;
}

Bytes encode_mlp(const MlpApprox& mlp) {
  mlp.validate();
  Writer out("SFMT", static_cast<std::uint8_t>(ContainerKind::kMlp));
  out.integer(static_cast<std::int64_t>(mlp.site));
  out.integer(mlp.layer);
  out.real(mlp.train_mse);
  out.real(mlp.heldout_mse);
  out.matrix(mlp.w1);
  out.vector(mlp.b1);
  out.matrix(mlp.w2);
  out.vector(mlp.b2);
  return out.take();
}

MlpApprox decode_mlp(std::span<const std::uint8_t> bytes) {
  Reader in(bytes, "SFMT", "MLP file");
  PSEL_ENFORCE(in.kind() == static_cast<std::uint8_t>(ContainerKind::kMlp), kIo,
               "MLP file: container holds kind " << int{in.kind()} << ", not an MLP");
  MlpApprox m;
  const std::int64_t site = in.integer();
  PSEL_ENFORCE(site >= 0 && site <= static_cast<std::int64_t>(SiteKind::kSoftmaxEntropy), kIo,
               "MLP file: unknown site kind " << site);
  m.site = static_cast<SiteKind>(site);
  m.layer = static_cast<int>(in.integer());
  m.train_mse = in.real();
  m.heldout_mse = in.real();
  m.w1 = in.matrix();
  m.b1 = in.vector();
  m.w2 = in.matrix();
  m.b2 = in.vector();
  in.finish();
  m.validate();
  return m;
}

Bytes encode_dataset(const Dataset& d) {
  d.validate();
  Writer out("SFDS", d.tokens ? 1 : 0);
  out.integer(static_cast<std::int64_t>(d.size()));
  out.integer(d.seq_len);
  out.integer(d.dim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.integer(d.lengths[i]);
    if (d.tokens) {
      for (int t : d.token_ids[i]) out.integer(t);
    } else {
      const Matrix& m = d.embedded[i];
      for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) out.real(m(r, c));
    }
  }
  return out.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  Reader in(bytes, "SFDS", "dataset file");
  PSEL_ENFORCE(in.kind() <= 1, kIo, "dataset file: unknown mode " << int{in.kind()});
  Dataset d;
  d.tokens = in.kind() == 1;
  const std::int64_t count = in.extent("count");
  d.seq_len = in.small("seq_len");
  d.dim = in.small("dim");
  PSEL_ENFORCE(d.seq_len >= 1 && d.dim >= 1, kIo, "dataset file: empty rows");
  const std::int64_t per = 1 + (d.tokens ? d.seq_len : std::int64_t{d.seq_len} * d.dim);
  PSEL_ENFORCE(count * per == in.remaining_words(), kIo,
               "dataset file: header promises " << count << " examples of " << per << " words, body holds "
                                                << in.remaining_words() << " words");
  for (std::int64_t i = 0; i < count; ++i) {
    d.lengths.push_back(static_cast<int>(in.integer()));
    if (d.tokens) {
      std::vector<int> ids(static_cast<std::size_t>(d.seq_len));
      for (int& t : ids) t = static_cast<int>(in.integer());
      d.token_ids.push_back(std::move(ids));
    } else {
      Matrix m(d.seq_len, d.dim);
      for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) m(r, c) = in.real();
      d.embedded.push_back(std::move(m));
    }
  }
  in.finish();
  d.validate();
  return d;
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  PSEL_ENFORCE(in.good(), kIo, "cannot open '" << path << "'");
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  PSEL_ENFORCE(!in.bad(), kIo, "read error on '" << path << "'");
  return out;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  PSEL_ENFORCE(!ec, kIo, "cannot create directory for '" << path << "': " << ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  PSEL_ENFORCE(out.good(), kIo, "cannot open '" << path << "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  PSEL_ENFORCE(out.good(), kIo, "write error on '" << path << "'");
}

void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_model(const std::string& path, const TransformerWeights& w) { write_file(path, encode_model(w)); }
TransformerWeights load_model(const std::string& path) { return decode_model(read_file(path)); }
void save_mlp(const std::string& path, const MlpApprox& mlp) { write_file(path, encode_mlp(mlp)); }
MlpApprox load_mlp(const std::string& path) { return decode_mlp(read_file(path)); }
void save_dataset(const std::string& path, const Dataset& d) { write_file(path, encode_dataset(d)); }
Dataset load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

std::string format_indices(std::span<const std::size_t> indices) {
  std::string out;
  for (std::size_t i : indices) {
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    PSEL_ENFORCE(ec == std::errc() && ptr == line.data() + line.size(), kIo,
                 "indices line " << n << ": not an index: '" << line << "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace psel
