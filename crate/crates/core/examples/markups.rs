//! Elasticities from margins, implied markup changes and pricing benchmarks.

use concentra::markups::{
    average_firm_markup, ces_product_markup, cournot_margin, implied_markup_change, invert_elasticity,
    uniform_price_markup,
};

fn main() -> concentra::Result<()> {
    let (mu, hbar_2002, hbar_2012) = (1.32, 0.049, 0.061);
    let eps = invert_elasticity(mu, hbar_2002)?;
    println!("margin {mu} at mean HHI {hbar_2002} gives elasticity {eps:.3}");
    println!("round trip: {:.6}", ces_product_markup(hbar_2002, eps)?);
    println!(
        "HHI {hbar_2002} -> {hbar_2012} raises the markup by {:.4}",
        implied_markup_change(hbar_2002, hbar_2012, eps)?
    );
    println!("Cournot margin at HHI 0.2, eps 3: {:.4}", cournot_margin(0.2, 3.0)?);

    let shares = [0.5, 0.2, 0.05];
    let outputs = [10.0, 4.0, 1.0];
    println!(
        "uniform pricing {:.4} vs market-by-market {:.4}",
        uniform_price_markup(&shares, &outputs, 4.0)?,
        average_firm_markup(&shares, &outputs, 4.0)?
    );
    Ok(())
}
