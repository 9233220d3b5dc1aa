#include "lorasim/firmware/elf_imports.hpp"

#include <elf.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace lorasim::firmware {

namespace {

#if defined(__x86_64__)
constexpr std::uint16_t kHostMachine = EM_X86_64;
#elif defined(__aarch64__)
constexpr std::uint16_t kHostMachine = EM_AARCH64;
#else
#error "unsupported host architecture"
#endif

template <typename T>
T read_at(const std::vector<char>& image, std::uint64_t offset, const std::filesystem::path& path) {
  if (offset > image.size() || image.size() - offset < sizeof(T)) {
    throw FirmwareLoadError(path.string() + ": truncated ELF structure");
  }
  T value;
  std::memcpy(&value, image.data() + offset, sizeof(T));
  return value;
}

}  // namespace

ModuleSymbols read_dynamic_symbols(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FirmwareLoadError("cannot open firmware module " + path.string());
  const std::vector<char> image{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  const auto eh = read_at<Elf64_Ehdr>(image, 0, path);
  if (std::memcmp(eh.e_ident, ELFMAG, SELFMAG) != 0) {
    throw FirmwareLoadError(path.string() + " is not an ELF file");
  }
  if (eh.e_ident[EI_CLASS] != ELFCLASS64 || eh.e_ident[EI_DATA] != ELFDATA2LSB || eh.e_machine != kHostMachine) {
    throw FirmwareLoadError(path.string() + " was not built for this host; cross-compile the firmware for the host");
  }
  if (eh.e_type != ET_DYN) {
    throw FirmwareLoadError(path.string() + " is not a shared object; build the firmware with -shared -fPIC");
  }

  ModuleSymbols out;
  for (std::uint16_t i = 0; i < eh.e_shnum; ++i) {
    const auto sh = read_at<Elf64_Shdr>(image, eh.e_shoff + std::uint64_t{i} * eh.e_shentsize, path);
    if (sh.sh_type != SHT_DYNSYM || sh.sh_entsize == 0) continue;
    const auto strtab = read_at<Elf64_Shdr>(image, eh.e_shoff + std::uint64_t{sh.sh_link} * eh.e_shentsize, path);
    const std::uint64_t count = sh.sh_size / sh.sh_entsize;
    for (std::uint64_t s = 1; s < count; ++s) {
      const auto sym = read_at<Elf64_Sym>(image, sh.sh_offset + s * sh.sh_entsize, path);
      if (sym.st_name >= strtab.sh_size || strtab.sh_offset + sym.st_name >= image.size()) {
        throw FirmwareLoadError(path.string() + ": symbol name out of range");
      }
      const char* name = image.data() + strtab.sh_offset + sym.st_name;
      const std::size_t room = image.size() - (strtab.sh_offset + sym.st_name);
      const std::string n(name, strnlen(name, room));
      if (n.empty()) continue;
      const unsigned bind = ELF64_ST_BIND(sym.st_info);
      const unsigned type = ELF64_ST_TYPE(sym.st_info);
      if (sym.st_shndx == SHN_UNDEF) {
        if (bind == STB_GLOBAL) out.imports.push_back(n);
      } else if ((bind == STB_GLOBAL || bind == STB_WEAK) && (type == STT_FUNC || type == STT_OBJECT)) {
        out.exports.push_back(n);
      }
    }
  }
  return out;
}

}  // namespace lorasim::firmware
