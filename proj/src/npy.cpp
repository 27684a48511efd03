#include "sketchfer/npy.hpp"

#include "sketchfer/error.hpp"

#include <bit>
#include <cstring>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read and written as little-endian");

namespace sketchfer::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

struct DtypeName {
  const char* descr;
  Dtype dtype;
};

constexpr DtypeName kDtypes[] = {
    {"<f4", Dtype::f32}, {"<f8", Dtype::f64}, {"|i1", Dtype::i8},  {"<i1", Dtype::i8},
    {"|u1", Dtype::u8},  {"<u1", Dtype::u8},  {"<i2", Dtype::i16}, {"<u2", Dtype::u16},
    {"<i4", Dtype::i32}, {"<u4", Dtype::u32}, {"<i8", Dtype::i64}, {"<u8", Dtype::u64},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\n");
  return s.substr(b, e - b + 1);
}

// Extracts the raw value text following 'key': in a Python dict literal.
std::string dict_value(const std::string& dict, const std::string& key, const std::string& name) {
  const std::string quoted = "'" + key + "'";
  auto pos = dict.find(quoted);
  if (pos == std::string::npos) {
    throw Error(Errc::io, name + ": NPY header lacks " + quoted);
  }
  pos = dict.find(':', pos + quoted.size());
  if (pos == std::string::npos) {
    throw Error(Errc::io, name + ": malformed NPY header");
  }
  ++pos;
  while (pos < dict.size() && dict[pos] == ' ') ++pos;
  std::size_t end = pos;
  if (dict[pos] == '(') {
    end = dict.find(')', pos);
    if (end == std::string::npos) throw Error(Errc::io, name + ": malformed shape");
    return dict.substr(pos, end - pos + 1);
  }
  while (end < dict.size() && dict[end] != ',' && dict[end] != '}') ++end;
  return trim(dict.substr(pos, end - pos));
}

template <typename T>
double read_as_double(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double decode(Dtype dtype, const char* p) {
  switch (dtype) {
    case Dtype::f32: return read_as_double<float>(p);
    case Dtype::f64: return read_as_double<double>(p);
    case Dtype::i8: return read_as_double<std::int8_t>(p);
    case Dtype::u8: return read_as_double<std::uint8_t>(p);
    case Dtype::i16: return read_as_double<std::int16_t>(p);
    case Dtype::u16: return read_as_double<std::uint16_t>(p);
    case Dtype::i32: return read_as_double<std::int32_t>(p);
    case Dtype::u32: return read_as_double<std::uint32_t>(p);
    case Dtype::i64: return read_as_double<std::int64_t>(p);
    case Dtype::u64: return read_as_double<std::uint64_t>(p);
  }
  return 0.0;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Errc::missing_file, path.string());
  }
  return in;
}

void write_header(std::ostream& out, const std::string& descr, const std::string& shape) {
  std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shape + ", }";
  // magic(6) + version(2) + header_len(2) + dict + '\n', padded to 64 bytes.
  const std::size_t unpadded = 10 + dict.size() + 1;
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');
  const auto header_len = static_cast<std::uint16_t>(dict.size());
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const char len_bytes[2] = {static_cast<char>(header_len & 0xff),
                             static_cast<char>(header_len >> 8)};
  out.write(len_bytes, 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
}

std::string shape_string(std::initializer_list<std::int64_t> dims) {
  if (dims.size() == 1) return "(" + std::to_string(*dims.begin()) + ",)";
  std::string s = "(";
  for (auto d : dims) {
    if (s.size() > 1) s += ", ";
    s += std::to_string(d);
  }
  return s + ")";
}

}  // namespace

std::size_t dtype_size(Dtype dtype) noexcept {
  switch (dtype) {
    case Dtype::i8:
    case Dtype::u8: return 1;
    case Dtype::i16:
    case Dtype::u16: return 2;
    case Dtype::f32:
    case Dtype::i32:
    case Dtype::u32: return 4;
    case Dtype::f64:
    case Dtype::i64:
    case Dtype::u64: return 8;
  }
  return 0;
}

std::string dtype_descr(Dtype dtype) {
  for (const auto& d : kDtypes) {
    if (d.dtype == dtype) return d.descr;
  }
  return "?";
}

std::int64_t Header::cols() const {
  if (shape.size() < 2) return 1;
  std::int64_t c = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
  return c;
}

Header read_header(std::istream& in, const std::string& name) {
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) {
    throw Error(Errc::io, name + ": not an NPY file");
  }
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (b[1] << 8);
  } else if (version[0] == 2 || version[0] == 3) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  } else {
    throw Error(Errc::io, name + ": unsupported NPY version " + std::to_string(version[0]));
  }
  std::string dict(header_len, '\0');
  in.read(dict.data(), header_len);
  if (!in) throw Error(Errc::io, name + ": truncated NPY header");

  Header h;
  const std::string descr = dict_value(dict, "descr", name);
  bool known = false;
  for (const auto& d : kDtypes) {
    if (descr == std::string("'") + d.descr + "'") {
      h.dtype = d.dtype;
      known = true;
    }
  }
  if (!known) throw Error(Errc::io, name + ": unsupported dtype " + descr);

  const std::string order = dict_value(dict, "fortran_order", name);
  if (order == "True") {
    h.fortran_order = true;
  } else if (order != "False") {
    throw Error(Errc::io, name + ": bad fortran_order " + order);
  }

  std::string shape = dict_value(dict, "shape", name);
  shape = shape.substr(1, shape.size() - 2);
  std::stringstream ss(shape);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      h.shape.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw Error(Errc::io, name + ": bad shape entry '" + item + "'");
    }
  }
  h.data_offset = in.tellg();
  return h;
}

Header read_header(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_header(in, path.string());
}

RowMatrix load_matrix(const std::filesystem::path& path) {
  auto in = open_input(path);
  const Header h = read_header(in, path.string());
  if (h.shape.size() > 2) {
    throw Error(Errc::shape_mismatch, path.string() + ": expected a 1-D or 2-D array");
  }
  const Index rows = static_cast<Index>(h.rows());
  const Index cols = static_cast<Index>(h.cols());
  const std::size_t width = dtype_size(h.dtype);
  std::vector<char> raw(static_cast<std::size_t>(rows * cols) * width);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!in) throw Error(Errc::io, path.string() + ": truncated payload");
  RowMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const Index flat = h.fortran_order ? j * rows + i : i * cols + j;
      m(i, j) = decode(h.dtype, raw.data() + static_cast<std::size_t>(flat) * width);
    }
  }
  return m;
}

std::vector<std::int64_t> load_integers(const std::filesystem::path& path) {
  const RowMatrix m = load_matrix(path);
  if (m.cols() != 1 && m.rows() != 1) {
    throw Error(Errc::shape_mismatch, path.string() + ": expected a 1-D array");
  }
  std::vector<std::int64_t> out(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    if (v != static_cast<double>(static_cast<std::int64_t>(v))) {
      throw Error(Errc::invalid_labels, path.string() + ": non-integral value");
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
  }
  return out;
}

void save_matrix(const std::filesystem::path& path, const RowBlock& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  write_header(out, "<f8", shape_string({m.rows(), m.cols()}));
  for (Index i = 0; i < m.rows(); ++i) {
    out.write(reinterpret_cast<const char*>(m.row(i).data()),
              static_cast<std::streamsize>(m.cols() * sizeof(double)));
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

void save_matrix_f32(const std::filesystem::path& path, const RowBlock& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  write_header(out, "<f4", shape_string({m.rows(), m.cols()}));
  std::vector<float> row(static_cast<std::size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(m(i, j));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

void save_integers(const std::filesystem::path& path, std::span<const std::int64_t> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  write_header(out, "<i8", shape_string({static_cast<std::int64_t>(values.size())}));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

RowReader::RowReader(const std::filesystem::path& path) : path_(path), in_(open_input(path)) {
  header_ = read_header(in_, path.string());
  if (header_.shape.size() > 2) {
    throw Error(Errc::shape_mismatch, path.string() + ": expected a 1-D or 2-D array");
  }
  if (header_.fortran_order && header_.shape.size() == 2 && header_.shape[1] > 1) {
    throw Error(Errc::io, path.string() + ": row streaming needs C order");
  }
}

RowMatrix RowReader::read(Index first, Index count) {
  if (first < 0 || count < 0 || first + count > rows()) {
    throw Error(Errc::io, path_.string() + ": row range out of bounds");
  }
  const std::size_t width = dtype_size(header_.dtype);
  const std::size_t row_bytes = static_cast<std::size_t>(cols()) * width;
  buffer_.resize(row_bytes * static_cast<std::size_t>(count));
  in_.clear();
  in_.seekg(header_.data_offset + static_cast<std::streamoff>(row_bytes) * first);
  in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  if (!in_) throw Error(Errc::io, path_.string() + ": truncated payload");
  RowMatrix m(count, cols());
  if (header_.dtype == Dtype::f64) {
    std::memcpy(m.data(), buffer_.data(), buffer_.size());
  } else {
    for (Index k = 0; k < m.size(); ++k) {
      m.data()[k] = decode(header_.dtype, buffer_.data() + static_cast<std::size_t>(k) * width);
    }
  }
  return m;
}

RowWriter::RowWriter(const std::filesystem::path& path, Index rows, Index cols)
    : path_(path), out_(path, std::ios::binary), rows_(rows), cols_(cols) {
  if (!out_) throw Error(Errc::io, "cannot write " + path.string());
  write_header(out_, "<f8", shape_string({rows, cols}));
}

void RowWriter::append(const RowBlock& block) {
  if (block.cols() != cols_ || written_ + block.rows() > rows_) {
    throw Error(Errc::io, path_.string() + ": block does not fit declared shape");
  }
  for (Index i = 0; i < block.rows(); ++i) {
    out_.write(reinterpret_cast<const char*>(block.row(i).data()),
               static_cast<std::streamsize>(cols_ * sizeof(double)));
  }
  written_ += block.rows();
}

void RowWriter::close() {
  out_.close();
  if (!out_ || written_ != rows_) {
    throw Error(Errc::io, path_.string() + ": wrote " + std::to_string(written_) + " of " +
                              std::to_string(rows_) + " rows");
  }
}

}  // namespace sketchfer::npy
