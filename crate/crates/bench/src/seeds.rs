//! Every random stream in a run is derived from one master seed:
//! stream k gets splitmix64(master + (k + 1)·γ) with γ the 64-bit golden
//! ratio constant.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRole {
    Subset = 0,
    MlpInit = 1,
    Shuffle = 2,
    Attack = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, role: SeedRole) -> u64 {
    splitmix64(master.wrapping_add((role as u64 + 1).wrapping_mul(GAMMA)))
}
