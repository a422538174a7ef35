#ifndef BNC_CSV_HPP
#define BNC_CSV_HPP

/*
 * Deterministic CSV emission: UTF-8, header row, '.' decimal separator, LF
 * line endings regardless of platform.  Numbers go through one fixed
 * format so identical runs produce byte-identical files.
 */

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "pde_core.hpp"

namespace bnc {
namespace csv {

inline std::string num(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class Writer {
  public:
    Writer(const std::string& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), cols_(header.size()), path_(path)
    {
        if (header.empty())
            throw InvalidParams("csv: empty header");
        if (!out_)
            throw Error("csv: cannot open " + path);
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& cells)
    {
        require_width(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << num(cells[i]);
        out_ << '\n';
    }

    void row(const std::vector<std::string>& cells)
    {
        require_width(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

    void close()
    {
        out_.flush();
        if (!out_)
            throw Error("csv: write failure on " + path_);
        out_.close();
    }

  private:
    void require_width(std::size_t n) const
    {
        if (n != cols_)
            throw InvalidParams("csv: row width " + std::to_string(n) + " does not match header width " +
                                std::to_string(cols_) + " in " + path_);
    }

    std::ofstream out_;
    std::size_t cols_;
    std::string path_;
};

inline void write_table(const std::string& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& rows)
{
    Writer w(path, header);
    for (const auto& r : rows)
        w.row(r);
    w.close();
}

}   // namespace csv
}   // namespace bnc

#endif
