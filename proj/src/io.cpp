#include <grape/errors.hpp>
#include <grape/io.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace grape {

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << content;
}

namespace bin {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, double v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s)
{
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

namespace {

void read_exact(std::istream& in, char* dst, std::size_t n)
{
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw ValidationError("unexpected end of binary data");
}

} // namespace

std::uint64_t get_u64(std::istream& in)
{
    std::uint64_t v;
    read_exact(in, reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

double get_f64(std::istream& in)
{
    double v;
    read_exact(in, reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

std::string get_string(std::istream& in)
{
    const std::uint64_t n = get_u64(in);
    if (n > (1u << 30))
        throw ValidationError("string length out of range in binary data");
    std::string s(n, '\0');
    read_exact(in, s.data(), n);
    return s;
}

void expect_magic(std::istream& in, const std::string& magic, const char* what)
{
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (got != magic)
        throw ValidationError(std::string("not a ") + what + " file");
}

} // namespace bin

} // namespace grape
