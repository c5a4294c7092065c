// Regenerates the desk scenes under scenes/ (OBJ meshes + manifests).
#include <filesystem>
#include <fstream>
#include <iostream>

#include "surfelnbp/scene.hpp"

namespace fs = std::filesystem;
using namespace surfelnbp;

namespace {

void emit(const fs::path& dir, const std::string& name, const std::vector<Triangle>& tris,
          const std::string& texture) {
  write_obj(tris, dir / (name + ".obj"));
  std::ofstream m(dir / (name + ".scene"));
  m << "name = " << name << "\nmesh = " << name << ".obj\nscale_diagonal = 0.3\ntexture = "
    << texture << '\n';
  std::cout << name << ": " << tris.size() << " triangles\n";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? argv[1] : "scenes";
  fs::create_directories(dir);
  emit(dir, "sphere", primitives::icosphere(3, 1.0), "gradient");
  emit(dir, "cube", primitives::cube(1.0), "checker");
  emit(dir, "torus", primitives::torus(1.0, 0.4, 48, 24), "checker");
  return 0;
}
