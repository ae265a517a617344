#pragma once

// Image/label datasets in the classic IDX container: big-endian magic
// 0x00000803 for images (u32 count, rows, cols, then bytes) and 0x00000801
// for labels (u32 count, then one byte per label). Pixels are scaled by
// 1/256 into [0, 255/256]; labels become one-hot rows of width 10.
//
// Because no real handwriting corpus ships with the repo, synth_dataset()
// fabricates two desk-scale stand-ins: "blobs" (ten noisy prototypes,
// linearly separable) and "sectors" (class = angular sector x ring parity
// of a 2-d latent point, linearly embedded; a linear model cannot resolve
// the ring parity but one hidden layer can).

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "psh/rng.hpp"
#include "psh/tensor.hpp"

namespace psh {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Tensor images;  // N x D, values in [0, 255/256]
  Tensor labels;  // N x 10 one-hot
  std::vector<std::size_t> train_idx, val_idx;

  std::size_t size() const { return images.rows(); }
  std::size_t dim() const { return images.cols(); }
  std::size_t classes() const { return labels.cols(); }

  // First train_n rows train, next val_n validate.
  void split(std::size_t train_n, std::size_t val_n) {
    if (train_n + val_n > size())
      throw DatasetError("split needs " + std::to_string(train_n + val_n) +
                         " rows, dataset has " + std::to_string(size()));
    if (train_n == 0 || val_n == 0)
      throw DatasetError("split: both parts must be nonempty");
    train_idx.clear();
    val_idx.clear();
    for (std::size_t i = 0; i < train_n; ++i) train_idx.push_back(i);
    for (std::size_t i = 0; i < val_n; ++i) val_idx.push_back(train_n + i);
  }

  Tensor gather_images(const std::vector<std::size_t>& rows) const {
    return gather(images, rows);
  }
  Tensor gather_labels(const std::vector<std::size_t>& rows) const {
    return gather(labels, rows);
  }

 private:
  static Tensor gather(const Tensor& src, const std::vector<std::size_t>& rows) {
    Tensor out({rows.size(), src.cols()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= src.rows()) throw DatasetError("gather: row out of range");
      for (std::size_t c = 0; c < src.cols(); ++c)
        out.at(r, c) = src.at(rows[r], c);
    }
    return out;
  }
};

// Raw IDX content before scaling/encoding.
struct RawIdx {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // count*rows*cols
  std::vector<std::uint8_t> labels;  // count
};

namespace detail {

inline std::uint32_t read_u32be(std::istream& in, const char* what) {
  std::uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DatasetError(std::string("truncated IDX file: ") + what);
  return std::uint32_t(b[0]) << 24 | std::uint32_t(b[1]) << 16 |
         std::uint32_t(b[2]) << 8 | std::uint32_t(b[3]);
}

inline void write_u32be(std::ostream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                             std::uint8_t(v >> 8), std::uint8_t(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

inline RawIdx read_idx_files(const std::string& images_path,
                             const std::string& labels_path) {
  RawIdx raw;
  {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + images_path);
    if (detail::read_u32be(in, "image magic") != 0x803u)
      throw DatasetError("bad image magic in " + images_path);
    raw.count = detail::read_u32be(in, "image count");
    raw.rows = detail::read_u32be(in, "image rows");
    raw.cols = detail::read_u32be(in, "image cols");
    raw.pixels.resize(raw.count * raw.rows * raw.cols);
    if (!in.read(reinterpret_cast<char*>(raw.pixels.data()),
                 std::streamsize(raw.pixels.size())))
      throw DatasetError("truncated image data in " + images_path);
  }
  {
    std::ifstream in(labels_path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + labels_path);
    if (detail::read_u32be(in, "label magic") != 0x801u)
      throw DatasetError("bad label magic in " + labels_path);
    const std::size_t n = detail::read_u32be(in, "label count");
    if (n != raw.count)
      throw DatasetError("image/label count mismatch: " +
                         std::to_string(raw.count) + " vs " +
                         std::to_string(n));
    raw.labels.resize(n);
    if (!in.read(reinterpret_cast<char*>(raw.labels.data()),
                 std::streamsize(n)))
      throw DatasetError("truncated label data in " + labels_path);
  }
  return raw;
}

inline void write_idx_files(const RawIdx& raw, const std::string& images_path,
                            const std::string& labels_path) {
  {
    std::ofstream out(images_path, std::ios::binary);
    if (!out) throw DatasetError("cannot create " + images_path);
    detail::write_u32be(out, 0x803u);
    detail::write_u32be(out, std::uint32_t(raw.count));
    detail::write_u32be(out, std::uint32_t(raw.rows));
    detail::write_u32be(out, std::uint32_t(raw.cols));
    out.write(reinterpret_cast<const char*>(raw.pixels.data()),
              std::streamsize(raw.pixels.size()));
  }
  {
    std::ofstream out(labels_path, std::ios::binary);
    if (!out) throw DatasetError("cannot create " + labels_path);
    detail::write_u32be(out, 0x801u);
    detail::write_u32be(out, std::uint32_t(raw.count));
    out.write(reinterpret_cast<const char*>(raw.labels.data()),
              std::streamsize(raw.count));
  }
}

// Scale by 1/256 and one-hot encode; `limit` caps the row count and must
// be positive (0 would build an empty dataset).
inline Dataset dataset_from_raw(const RawIdx& raw, std::size_t limit) {
  if (limit == 0) throw DatasetError("limit=0 would yield an empty dataset");
  const std::size_t n = std::min(limit, raw.count);
  if (n == 0) throw DatasetError("empty dataset");
  const std::size_t d = raw.rows * raw.cols;
  Dataset ds;
  ds.images = Tensor({n, d});
  ds.labels = Tensor({n, 10});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      ds.images.at(i, j) = double(raw.pixels[i * d + j]) / 256.0;
    const std::uint8_t lab = raw.labels[i];
    if (lab > 9)
      throw DatasetError("label " + std::to_string(lab) + " out of range");
    ds.labels.at(i, std::size_t(lab)) = 1.0;
  }
  return ds;
}

inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path, std::size_t limit) {
  return dataset_from_raw(read_idx_files(images_path, labels_path), limit);
}

// --- synthetic corpora --------------------------------------------------------

enum class SynthKind : std::uint8_t { Blobs, Sectors };

inline SynthKind synth_kind_from_name(const std::string& s) {
  if (s == "blobs") return SynthKind::Blobs;
  if (s == "sectors") return SynthKind::Sectors;
  throw DatasetError("unknown synthetic dataset kind: " + s);
}

inline RawIdx synth_dataset(SynthKind kind, std::size_t n, std::uint64_t seed,
                            std::size_t rows = 28, std::size_t cols = 28) {
  if (n == 0) throw DatasetError("synthetic dataset needs n > 0");
  RawIdx raw;
  raw.count = n;
  raw.rows = rows;
  raw.cols = cols;
  const std::size_t d = rows * cols;
  raw.pixels.resize(n * d);
  raw.labels.resize(n);
  Rng rng = Rng::derive(seed, 0xda7a5e7ull);

  if (kind == SynthKind::Blobs) {
    // Ten random prototypes plus uniform pixel noise.
    std::vector<std::uint8_t> proto(10 * d);
    for (auto& p : proto) p = std::uint8_t(rng.below(200));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng.below(10);
      raw.labels[i] = std::uint8_t(c);
      for (std::size_t j = 0; j < d; ++j) {
        const double noisy =
            double(proto[c * d + j]) + rng.uniform(-40.0, 40.0);
        raw.pixels[i * d + j] =
            std::uint8_t(std::clamp(noisy, 0.0, 255.0));
      }
    }
    return raw;
  }

  // Sectors: latent point on one of two rings, class = sector*2 + ring.
  // The embedding into pixel space is linear, so the ring bit stays
  // linearly inseparable in the image too.
  constexpr std::size_t kSectors = 5;
  std::vector<double> emb(d * 2);
  for (auto& v : emb) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t sector = rng.below(kSectors);
    const std::size_t ring = rng.below(2);
    raw.labels[i] = std::uint8_t(sector * 2 + ring);
    const double theta =
        (double(sector) + rng.next_unit()) * (2.0 * 3.14159265358979323846 /
                                              double(kSectors));
    const double radius = (ring == 0 ? 0.45 : 1.0) + rng.uniform(-0.08, 0.08);
    const double z0 = radius * std::cos(theta);
    const double z1 = radius * std::sin(theta);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = emb[j * 2] * z0 + emb[j * 2 + 1] * z1;
      // squash to pixel range, keep it roughly centered
      const double pix = 128.0 + 60.0 * v + rng.uniform(-6.0, 6.0);
      raw.pixels[i * d + j] = std::uint8_t(std::clamp(pix, 0.0, 255.0));
    }
  }
  return raw;
}

}  // namespace psh
