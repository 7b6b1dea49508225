#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "betatess/point_process.hpp"
#include "betatess/tessellation.hpp"

namespace betatess {

// Decimal form with 17 significant digits, which round-trips every double.
std::string format_double(double x);

// Header v1,...,vd,h; one row per point in sample order.
void write_points_csv(const std::string& path, const PointSample& s);
// Returns d x n locations and the heights.
void read_points_csv(const std::string& path, Eigen::MatrixXd& v, Eigen::VectorXd& h);

// Header s0,...,sd; one row per simplex in canonical order.
void write_simplices_csv(const std::string& path, const Triangulation& tri);

// Long form, one row per cell vertex: site,status,certified,n_facets,vertex,x1,...,xd. Cells without
// vertices (empty or unbounded) get a single row with vertex = -1 and empty coordinates.
// Returns the row count.
long long write_cells_csv(const std::string& path, const Tessellation& t);

// Data rows of a CSV file (lines after the header).
long long csv_row_count(const std::string& path);

// 64-bit FNV-1a of the file bytes, as 16 hex digits.
std::string fnv1a_file(const std::string& path);
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t x);

// Worker count: TESS_THREADS if set and positive, else the hardware concurrency, never below 1.
int worker_count();

// Calls f(i) for i in [0, n) on up to workers threads, in no particular order. After the first exception
// no new indices start, and it is rethrown once the workers finish.
void parallel_for(int n, int workers, const std::function<void(int)>& f);

}  // namespace betatess
