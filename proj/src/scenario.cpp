#include "nfloc/scenario.hpp"

#include <cmath>

namespace nfloc {

double beta_for_half_power_beamwidth(double hpbw_rad) {
    const double c = std::cos(hpbw_rad / 2.0);
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("beamwidth must be in (0, pi)");
    return std::log(2.0) / (-2.0 * std::log(c));
}

std::vector<Eigen::Vector3d> make_element_layout(int n_elements, double wavelength) {
    int n_y = 0, n_z = 0;
    if (n_elements == 4) {
        n_y = 2;
        n_z = 2;
    } else if (n_elements == 8) {
        n_y = 4;
        n_z = 2;
    } else {
        throw std::invalid_argument("element layout: supported sizes are 4 (2x2) and 8 (4x2)");
    }
    const double pitch = wavelength / 2.0;
    std::vector<Eigen::Vector3d> elements;
    elements.reserve(static_cast<std::size_t>(n_elements));
    for (int iz = 0; iz < n_z; ++iz)
        for (int iy = 0; iy < n_y; ++iy)
            elements.emplace_back(0.0, (iy - (n_y - 1) / 2.0) * pitch,
                                  (iz - (n_z - 1) / 2.0) * pitch);
    return elements;
}

}  // namespace nfloc
