#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fieldscout/common.hpp"

namespace fieldscout {

/// CSV with a versioned schema string on the first line. All writers in the
/// toolkit go through this so deterministic runs emit identical bytes.
struct CsvTable {
    std::string schema;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_string() const {
        std::ostringstream os;
        os << "# schema=" << schema << "\n";
        for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
        os << "\n";
        for (const auto& row : rows) {
            for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
            os << "\n";
        }
        return os.str();
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw io_error("cannot write " + path);
        out << to_string();
    }

    static CsvTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open " + path);
        CsvTable t;
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (first) {
                first = false;
                auto pos = line.find("schema=");
                if (line.rfind("#", 0) == 0 && pos != std::string::npos) {
                    t.schema = line.substr(pos + 7);
                    continue;
                }
                // fall through: headerless schema line missing
            }
            std::vector<std::string> fields;
            std::string cur;
            for (char c : line) {
                if (c == ',') {
                    fields.push_back(cur);
                    cur.clear();
                } else {
                    cur.push_back(c);
                }
            }
            fields.push_back(cur);
            if (t.header.empty())
                t.header = fields;
            else
                t.rows.push_back(fields);
        }
        return t;
    }

    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return int(i);
        throw validation_error("CSV column not found: " + name);
    }
};

} // namespace fieldscout
