#include "betatess/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>
#include <thread>

#include "betatess/error.hpp"

namespace betatess {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

const char* status_name(CellStatus s) {
  switch (s) {
    case CellStatus::Bounded: return "bounded";
    case CellStatus::Empty: return "empty";
    case CellStatus::Unbounded: return "unbounded";
  }
  return "?";
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_points_csv(const std::string& path, const PointSample& s) {
  std::ofstream out = open_out(path);
  const int d = static_cast<int>(s.v.rows());
  for (int k = 0; k < d; ++k) out << 'v' << k + 1 << ',';
  out << "h\n";
  for (int i = 0; i < s.size(); ++i) {
    for (int k = 0; k < d; ++k) out << format_double(s.v(k, i)) << ',';
    out << format_double(s.h[i]) << '\n';
  }
}

void read_points_csv(const std::string& path, Eigen::MatrixXd& v, Eigen::VectorXd& h) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::string line;
  std::getline(in, line);
  const int d = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (d < 1 || line.substr(line.rfind(',') + 1) != "h") throw Error(ErrorCode::IoError, "bad points header in " + path);
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    int k = 0;
    while (std::getline(ss, f, ',')) vals.push_back(std::stod(f)), ++k;
    if (k != d + 1) throw Error(ErrorCode::IoError, "bad points row in " + path);
  }
  const int n = static_cast<int>(vals.size()) / (d + 1);
  v.resize(d, n);
  h.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) v(k, i) = vals[i * (d + 1) + k];
    h[i] = vals[i * (d + 1) + d];
  }
}

void write_simplices_csv(const std::string& path, const Triangulation& tri) {
  std::ofstream out = open_out(path);
  for (int k = 0; k <= tri.d; ++k) out << (k ? "," : "") << 's' << k;
  out << '\n';
  for (int s = 0; s < tri.simplex_count(); ++s) {
    for (int k = 0; k <= tri.d; ++k) out << (k ? "," : "") << tri.simplices[s * (tri.d + 1) + k];
    out << '\n';
  }
}

long long write_cells_csv(const std::string& path, const Tessellation& t) {
  std::ofstream out = open_out(path);
  const int d = t.tri.d;
  out << "site,status,certified,n_facets,vertex";
  for (int k = 0; k < d; ++k) out << ",x" << k + 1;
  out << '\n';
  long long rows = 0;
  for (const auto& c : t.cells) {
    const std::string head = std::to_string(c.site) + ',' + status_name(c.status) + ',' +
                             (c.certified ? "1" : "0") + ',' + std::to_string(c.n_facets) + ',';
    if (c.status != CellStatus::Bounded || c.cell.vertices.empty()) {
      out << head << "-1" << std::string(d, ',') << '\n';
      ++rows;
      continue;
    }
    for (int j = 0; j < c.cell.vertex_count(); ++j) {
      out << head << j;
      for (int k = 0; k < d; ++k) out << ',' << format_double(c.cell.vertices[j][k]);
      out << '\n';
      ++rows;
    }
  }
  return rows;
}

long long csv_row_count(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::string line;
  long long n = -1;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return std::max(0LL, n);
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(bytes));
}

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TESS_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = cap;
  }
  return std::max(1, n);
}

void parallel_for(int n, int workers, const std::function<void(int)>& f) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::mutex m;
  int next = 0;
  std::exception_ptr err;
  auto work = [&] {
    for (;;) {
      int i;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= n || err) return;
        i = next++;
      }
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace betatess
