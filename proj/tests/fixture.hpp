#pragma once

// Synthetic UJI-format fingerprint fixture with planted spatial structure:
// two buildings of three floors, APs scattered per floor, log-distance path
// loss with floor and building attenuation. Values below the detection limit
// are written as the +100 missing sentinel.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "qscl/rng.hpp"

struct SyntheticAp {
    int building;
    int floor;
    double x;
    double y;
};

inline std::string make_synthetic_csv(size_t n_samples, size_t n_aps, uint64_t seed) {
    qscl::Rng rng(seed);
    const int n_buildings = 2;
    const int n_floors = 3;
    const double building_offset = 120.0;
    const double side = 50.0;

    std::vector<SyntheticAp> aps;
    for (size_t a = 0; a < n_aps; ++a) {
        SyntheticAp ap;
        ap.building = static_cast<int>(a % n_buildings);
        ap.floor = static_cast<int>((a / n_buildings) % n_floors);
        ap.x = ap.building * building_offset + rng.uniform01() * side;
        ap.y = rng.uniform01() * side;
        aps.push_back(ap);
    }

    std::ostringstream csv;
    for (size_t a = 0; a < n_aps; ++a) csv << "WAP" << (a + 1) << ",";
    csv << "X,Y,FLOOR,BUILDINGID\n";

    for (size_t s = 0; s < n_samples; ++s) {
        const int building = static_cast<int>(rng.uniform_int(n_buildings));
        const int floor = static_cast<int>(rng.uniform_int(n_floors));
        const double x = building * building_offset + rng.uniform01() * side;
        const double y = rng.uniform01() * side;

        for (const auto& ap : aps) {
            const double dx = x - ap.x, dy = y - ap.y;
            const double dist = std::max(1.0, std::sqrt(dx * dx + dy * dy));
            double rssi = -30.0 - 22.0 * std::log10(dist);
            rssi -= 6.0 * std::abs(floor - ap.floor);
            rssi -= 35.0 * std::abs(building - ap.building);
            rssi += rng.gaussian(0.0, 1.5);
            if (rssi < -104.0)
                csv << 100 << ",";  // not detected
            else
                csv << rssi << ",";
        }
        csv << x << "," << y << "," << floor << "," << building << "\n";
    }
    return csv.str();
}
