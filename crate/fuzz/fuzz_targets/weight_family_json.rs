#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(fam) = lacuna::weights::WeightFamily::from_json(s) {
        // realize on a small grid only; custom grids must match it
        if let Ok(grid) = lacuna::grid::Grid::unit(2, 4) {
            let _ = fam.realize(&grid);
        }
    }
});
