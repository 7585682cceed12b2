//! Overlap between the published mSFFS and SFFS selections at k = 20.

use connsel::dataset::FeatureLayout;
use connsel::evaluation::jaccard;

const MSFFS: &str = "P4-O1(theta), Fp1-F7(theta), T4-Pz(theta), F4-P4(beta), F8-Cz(delta), Fp1-F4(beta), \
    T5-O1(theta), T3-T6(delta), T5-P3(delta), F8-T3(gamma), Fz-P4(gamma), F8-T4(beta), F3-F4(alpha), \
    T3-C3(gamma), C3-T4(beta), F4-F8(alpha), Fz-F4(alpha), F8-T5(delta), Fz-Cz(delta), Fp2-F7(theta)";
const SFFS: &str = "Fp1-F7(theta), P4-O1(theta), T4-Pz(gamma), T4-Pz(theta), F4-C4(theta), Fp2-T4(theta), \
    Fz-P4(gamma), F4-C3(alpha), F8-T3(gamma), T3-C3(gamma), Fz-F8(delta), Fp1-F4(beta), F7-P4(gamma), \
    F4-C4(delta), C3-O1(delta), Cz-T6(beta), F4-P4(beta), F8-T4(beta), C3-T4(beta), F8-Cz(delta)";

fn main() -> connsel::Result<()> {
    let layout = FeatureLayout::infer(855);
    let parse = |list: &str| -> connsel::Result<Vec<usize>> { list.split(", ").map(|n| layout.parse_name(n)).collect() };
    let (a, b) = (parse(MSFFS)?, parse(SFFS)?);
    let common: Vec<String> = a.iter().filter(|id| b.contains(id)).map(|&id| layout.name(id).unwrap()).collect();
    println!("{} shared features: {}", common.len(), common.join(", "));
    println!("Jaccard index {:.3}", jaccard(&a, &b));
    Ok(())
}
