//! Periodic table data and valence conventions.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub symbol: &'static str,
    pub number: u8,
    /// Standard atomic weight in unified atomic mass units.
    pub mass: f64,
    pub outer_electrons: u8,
}

static ELEMENTS: [Element; 118] = [
    Element { symbol: "H", number: 1, mass: 1.0080, outer_electrons: 1 },
    Element { symbol: "He", number: 2, mass: 4.0030, outer_electrons: 2 },
    Element { symbol: "Li", number: 3, mass: 6.9410, outer_electrons: 1 },
    Element { symbol: "Be", number: 4, mass: 9.0120, outer_electrons: 2 },
    Element { symbol: "B", number: 5, mass: 10.8120, outer_electrons: 3 },
    Element { symbol: "C", number: 6, mass: 12.0110, outer_electrons: 4 },
    Element { symbol: "N", number: 7, mass: 14.0070, outer_electrons: 5 },
    Element { symbol: "O", number: 8, mass: 15.9990, outer_electrons: 6 },
    Element { symbol: "F", number: 9, mass: 18.9980, outer_electrons: 7 },
    Element { symbol: "Ne", number: 10, mass: 20.1800, outer_electrons: 8 },
    Element { symbol: "Na", number: 11, mass: 22.9900, outer_electrons: 1 },
    Element { symbol: "Mg", number: 12, mass: 24.3050, outer_electrons: 2 },
    Element { symbol: "Al", number: 13, mass: 26.9820, outer_electrons: 3 },
    Element { symbol: "Si", number: 14, mass: 28.0860, outer_electrons: 4 },
    Element { symbol: "P", number: 15, mass: 30.9740, outer_electrons: 5 },
    Element { symbol: "S", number: 16, mass: 32.0670, outer_electrons: 6 },
    Element { symbol: "Cl", number: 17, mass: 35.4530, outer_electrons: 7 },
    Element { symbol: "Ar", number: 18, mass: 39.9480, outer_electrons: 8 },
    Element { symbol: "K", number: 19, mass: 39.0980, outer_electrons: 1 },
    Element { symbol: "Ca", number: 20, mass: 40.0780, outer_electrons: 2 },
    Element { symbol: "Sc", number: 21, mass: 44.9560, outer_electrons: 3 },
    Element { symbol: "Ti", number: 22, mass: 47.8670, outer_electrons: 4 },
    Element { symbol: "V", number: 23, mass: 50.9440, outer_electrons: 5 },
    Element { symbol: "Cr", number: 24, mass: 51.9960, outer_electrons: 6 },
    Element { symbol: "Mn", number: 25, mass: 54.9380, outer_electrons: 7 },
    Element { symbol: "Fe", number: 26, mass: 55.8450, outer_electrons: 8 },
    Element { symbol: "Co", number: 27, mass: 58.9330, outer_electrons: 9 },
    Element { symbol: "Ni", number: 28, mass: 58.6930, outer_electrons: 10 },
    Element { symbol: "Cu", number: 29, mass: 63.5460, outer_electrons: 11 },
    Element { symbol: "Zn", number: 30, mass: 65.3900, outer_electrons: 2 },
    Element { symbol: "Ga", number: 31, mass: 69.7230, outer_electrons: 3 },
    Element { symbol: "Ge", number: 32, mass: 72.6100, outer_electrons: 4 },
    Element { symbol: "As", number: 33, mass: 74.9220, outer_electrons: 5 },
    Element { symbol: "Se", number: 34, mass: 78.9600, outer_electrons: 6 },
    Element { symbol: "Br", number: 35, mass: 79.9040, outer_electrons: 7 },
    Element { symbol: "Kr", number: 36, mass: 83.8000, outer_electrons: 8 },
    Element { symbol: "Rb", number: 37, mass: 85.4680, outer_electrons: 1 },
    Element { symbol: "Sr", number: 38, mass: 87.6200, outer_electrons: 2 },
    Element { symbol: "Y", number: 39, mass: 88.9060, outer_electrons: 3 },
    Element { symbol: "Zr", number: 40, mass: 91.2240, outer_electrons: 4 },
    Element { symbol: "Nb", number: 41, mass: 92.9060, outer_electrons: 5 },
    Element { symbol: "Mo", number: 42, mass: 95.9400, outer_electrons: 6 },
    Element { symbol: "Tc", number: 43, mass: 98.0000, outer_electrons: 7 },
    Element { symbol: "Ru", number: 44, mass: 101.0700, outer_electrons: 8 },
    Element { symbol: "Rh", number: 45, mass: 102.9060, outer_electrons: 9 },
    Element { symbol: "Pd", number: 46, mass: 106.4200, outer_electrons: 10 },
    Element { symbol: "Ag", number: 47, mass: 107.8680, outer_electrons: 11 },
    Element { symbol: "Cd", number: 48, mass: 112.4120, outer_electrons: 2 },
    Element { symbol: "In", number: 49, mass: 114.8180, outer_electrons: 3 },
    Element { symbol: "Sn", number: 50, mass: 118.7110, outer_electrons: 4 },
    Element { symbol: "Sb", number: 51, mass: 121.7600, outer_electrons: 5 },
    Element { symbol: "Te", number: 52, mass: 127.6000, outer_electrons: 6 },
    Element { symbol: "I", number: 53, mass: 126.9040, outer_electrons: 7 },
    Element { symbol: "Xe", number: 54, mass: 131.2900, outer_electrons: 8 },
    Element { symbol: "Cs", number: 55, mass: 132.9050, outer_electrons: 1 },
    Element { symbol: "Ba", number: 56, mass: 137.3280, outer_electrons: 2 },
    Element { symbol: "La", number: 57, mass: 138.9060, outer_electrons: 3 },
    Element { symbol: "Ce", number: 58, mass: 140.1160, outer_electrons: 4 },
    Element { symbol: "Pr", number: 59, mass: 140.9080, outer_electrons: 3 },
    Element { symbol: "Nd", number: 60, mass: 144.2400, outer_electrons: 4 },
    Element { symbol: "Pm", number: 61, mass: 145.0000, outer_electrons: 5 },
    Element { symbol: "Sm", number: 62, mass: 150.3600, outer_electrons: 6 },
    Element { symbol: "Eu", number: 63, mass: 151.9640, outer_electrons: 7 },
    Element { symbol: "Gd", number: 64, mass: 157.2500, outer_electrons: 8 },
    Element { symbol: "Tb", number: 65, mass: 158.9250, outer_electrons: 9 },
    Element { symbol: "Dy", number: 66, mass: 162.5000, outer_electrons: 10 },
    Element { symbol: "Ho", number: 67, mass: 164.9300, outer_electrons: 11 },
    Element { symbol: "Er", number: 68, mass: 167.2600, outer_electrons: 12 },
    Element { symbol: "Tm", number: 69, mass: 168.9340, outer_electrons: 13 },
    Element { symbol: "Yb", number: 70, mass: 173.0400, outer_electrons: 14 },
    Element { symbol: "Lu", number: 71, mass: 174.9670, outer_electrons: 15 },
    Element { symbol: "Hf", number: 72, mass: 178.4900, outer_electrons: 4 },
    Element { symbol: "Ta", number: 73, mass: 180.9480, outer_electrons: 5 },
    Element { symbol: "W", number: 74, mass: 183.8400, outer_electrons: 6 },
    Element { symbol: "Re", number: 75, mass: 186.2070, outer_electrons: 7 },
    Element { symbol: "Os", number: 76, mass: 190.2300, outer_electrons: 8 },
    Element { symbol: "Ir", number: 77, mass: 192.2170, outer_electrons: 9 },
    Element { symbol: "Pt", number: 78, mass: 195.0780, outer_electrons: 10 },
    Element { symbol: "Au", number: 79, mass: 196.9670, outer_electrons: 11 },
    Element { symbol: "Hg", number: 80, mass: 200.5900, outer_electrons: 2 },
    Element { symbol: "Tl", number: 81, mass: 204.3830, outer_electrons: 3 },
    Element { symbol: "Pb", number: 82, mass: 207.2000, outer_electrons: 4 },
    Element { symbol: "Bi", number: 83, mass: 208.9800, outer_electrons: 5 },
    Element { symbol: "Po", number: 84, mass: 209.0000, outer_electrons: 6 },
    Element { symbol: "At", number: 85, mass: 210.0000, outer_electrons: 7 },
    Element { symbol: "Rn", number: 86, mass: 222.0000, outer_electrons: 8 },
    Element { symbol: "Fr", number: 87, mass: 223.0000, outer_electrons: 1 },
    Element { symbol: "Ra", number: 88, mass: 226.0000, outer_electrons: 2 },
    Element { symbol: "Ac", number: 89, mass: 227.0000, outer_electrons: 3 },
    Element { symbol: "Th", number: 90, mass: 232.0380, outer_electrons: 4 },
    Element { symbol: "Pa", number: 91, mass: 231.0360, outer_electrons: 3 },
    Element { symbol: "U", number: 92, mass: 238.0290, outer_electrons: 4 },
    Element { symbol: "Np", number: 93, mass: 237.0000, outer_electrons: 5 },
    Element { symbol: "Pu", number: 94, mass: 244.0000, outer_electrons: 6 },
    Element { symbol: "Am", number: 95, mass: 243.0000, outer_electrons: 7 },
    Element { symbol: "Cm", number: 96, mass: 247.0000, outer_electrons: 8 },
    Element { symbol: "Bk", number: 97, mass: 247.0000, outer_electrons: 9 },
    Element { symbol: "Cf", number: 98, mass: 251.0000, outer_electrons: 10 },
    Element { symbol: "Es", number: 99, mass: 252.0000, outer_electrons: 11 },
    Element { symbol: "Fm", number: 100, mass: 257.0000, outer_electrons: 12 },
    Element { symbol: "Md", number: 101, mass: 258.0000, outer_electrons: 13 },
    Element { symbol: "No", number: 102, mass: 259.0000, outer_electrons: 14 },
    Element { symbol: "Lr", number: 103, mass: 262.0000, outer_electrons: 15 },
    Element { symbol: "Rf", number: 104, mass: 267.0000, outer_electrons: 2 },
    Element { symbol: "Db", number: 105, mass: 268.0000, outer_electrons: 2 },
    Element { symbol: "Sg", number: 106, mass: 269.0000, outer_electrons: 2 },
    Element { symbol: "Bh", number: 107, mass: 270.0000, outer_electrons: 2 },
    Element { symbol: "Hs", number: 108, mass: 269.0000, outer_electrons: 2 },
    Element { symbol: "Mt", number: 109, mass: 278.0000, outer_electrons: 2 },
    Element { symbol: "Ds", number: 110, mass: 281.0000, outer_electrons: 2 },
    Element { symbol: "Rg", number: 111, mass: 281.0000, outer_electrons: 2 },
    Element { symbol: "Cn", number: 112, mass: 285.0000, outer_electrons: 2 },
    Element { symbol: "Nh", number: 113, mass: 284.0000, outer_electrons: 2 },
    Element { symbol: "Fl", number: 114, mass: 289.0000, outer_electrons: 2 },
    Element { symbol: "Mc", number: 115, mass: 288.0000, outer_electrons: 2 },
    Element { symbol: "Lv", number: 116, mass: 293.0000, outer_electrons: 2 },
    Element { symbol: "Ts", number: 117, mass: 292.0000, outer_electrons: 2 },
    Element { symbol: "Og", number: 118, mass: 294.0000, outer_electrons: 2 },
];

/// Symbols accepted outside brackets.
pub const ORGANIC_SUBSET: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];

/// Symbols that may be written lowercase (aromatic).
pub const AROMATIC_SYMBOLS: [&str; 8] = ["b", "c", "n", "o", "p", "s", "se", "as"];

pub fn by_symbol(symbol: &str) -> Option<&'static Element> {
    ELEMENTS.iter().find(|e| e.symbol == symbol)
}

pub fn by_number(number: u8) -> Option<&'static Element> {
    ELEMENTS.get(usize::from(number).checked_sub(1)?)
}

/// Allowed valences, smallest first. Elements outside the table get no
/// implicit hydrogens.
pub fn default_valences(number: u8) -> &'static [u8] {
    match number {
        5 => &[3],
        6 => &[4],
        7 => &[3],
        8 => &[2],
        9 => &[1],
        14 => &[4],
        15 => &[3, 5],
        16 => &[2, 4, 6],
        17 | 35 | 53 => &[1],
        33 => &[3, 5],
        34 => &[2, 4, 6],
        _ => &[],
    }
}

/// Valence shift caused by a formal charge: group 13 loses a bond per
/// positive charge, carbon loses one per charge of either sign and groups
/// 15-17 gain one per positive charge.
pub fn charge_adjusted(valence: i32, number: u8, charge: i32) -> i32 {
    match number {
        5 => valence - charge,
        6 | 14 => valence - charge.abs(),
        7 | 8 | 9 | 15 | 16 | 17 | 33 | 34 | 35 | 53 => valence + charge,
        _ => valence,
    }
}
