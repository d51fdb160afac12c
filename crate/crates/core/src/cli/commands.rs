use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Command, Context, Counterfactual, Markups, Outcome, OutputFormat, Source, Synth};
use crate::concentration::{
    cross_section_change, local_hhi_index, methodology_gap, national_hhi, rst_delta, series_to_csv, series_to_json,
    top_n_index, ConcentrationSeries, WeightScheme,
};
use crate::counterfactuals::{
    breakup_single_market, mixed_channel_firms, nonstore_bounds_index, nonstore_shares, rank_preserving,
};
use crate::decomposition::{decompose_all, decompose_national, reports_to_csv, DecompositionReport};
use crate::error::{Error, Result};
use crate::markups::{ces_product_markup, cournot_margin, load_margins, MarkupModel};
use crate::microdata::{
    build_cube, deflate_sales, impute_missing_product_mix, load_establishments, CsvSchema, CubeEntry, CubeOptions,
    DeflatorSeries, EstablishmentRecord, Geography, ImputedRecord, MarketDefinition, ProductCategoryMap, Reject,
    SalesCube,
};
use crate::synthcensus::{
    generate_economy, mc_pair_statistics, solve_cournot_market, EconomyConfig, McEstimate,
};

pub(super) fn execute(cmd: &Command, ctx: &Context) -> Result<Outcome> {
    match cmd {
        Command::Ingest {
            input,
            deflators,
            rejects,
        } => ingest(ctx, input, deflators.as_deref(), rejects.as_deref()),
        Command::Hhi {
            source,
            year,
            weight_year,
            measure,
        } => hhi(ctx, source, *year, *weight_year, measure),
        Command::Topn { source, n, year } => topn(ctx, source, *n, *year),
        Command::Decompose { source, year, product } => decompose(ctx, source, *year, product.as_deref()),
        Command::Counterfactual { kind } => match kind {
            Counterfactual::Breakup { source, year } => breakup(ctx, source, *year),
            Counterfactual::Rank { source, base, target } => rank(ctx, source, *base, *target),
        },
        Command::Bounds { input, year } => bounds(ctx, input, *year),
        Command::Rst { source, base, target } => rst(ctx, source, *base, *target),
        Command::Markups { kind } => match kind {
            Markups::Fit { source, margins } => markups_fit(ctx, source, margins),
            Markups::Imply { eps, from, to, cournot } => markups_imply(ctx, *eps, *from, *to, *cournot),
        },
        Command::Synth { kind } => match kind {
            Synth::Generate { economy, preset, rows } => synth_generate(ctx, economy.as_deref(), preset, *rows),
            Synth::Equilibrium { costs, eps } => equilibrium(ctx, costs, *eps),
        },
        Command::Oracle {
            source,
            year,
            product,
            samples,
        } => oracle(ctx, source, *year, product.as_deref(), *samples),
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn category_map(ctx: &Context) -> Result<ProductCategoryMap> {
    match &ctx.settings.categories {
        None => Ok(ProductCategoryMap::retail_default()),
        Some(p) => ProductCategoryMap::from_csv(std::fs::File::open(p).map_err(|e| Error::io(p, e))?),
    }
}

fn load_records(path: &Path, notes: &mut Vec<String>) -> Result<(Vec<EstablishmentRecord>, Vec<Reject>)> {
    let out = load_establishments(path, &CsvSchema::default())?;
    if !out.ignored_columns.is_empty() {
        notes.push(format!("ignored columns: {}", out.ignored_columns.join(", ")));
    }
    if !out.rejects.is_empty() {
        notes.push(format!("{} row(s) rejected", out.rejects.len()));
    }
    Ok((out.records, out.rejects))
}

fn prepare_records(
    ctx: &Context,
    records: Vec<EstablishmentRecord>,
    map: &ProductCategoryMap,
    geography: Geography,
    notes: &mut Vec<String>,
) -> Result<(SalesCube, Vec<Reject>)> {
    let s = &ctx.settings;
    let imputed = match s.market_def {
        MarketDefinition::Product => impute_missing_product_mix(records, map)?,
        MarketDefinition::Industry => ImputedRecord::without_mix(records),
    };
    let built = build_cube(&imputed, map, CubeOptions::new(s.market_def, geography).with_weights(s.weights))?;
    if !built.rejects.is_empty() {
        notes.push(format!("{} record(s) left out of the cube", built.rejects.len()));
    }
    Ok((built.cube, built.rejects))
}

/// Builds or reads the cube named by `source`; returns it with the files read.
fn load_cube(ctx: &Context, source: &Source, notes: &mut Vec<String>) -> Result<(SalesCube, Vec<PathBuf>)> {
    let s = &ctx.settings;
    if let Some(path) = &source.cube {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        return Ok((SalesCube::read_csv(f, s.market_def, s.geo)?, vec![path.clone()]));
    }
    let path = source.input.as_ref().expect("clap enforces one source");
    let (records, _) = load_records(path, notes)?;
    let (cube, _) = prepare_records(ctx, records, &category_map(ctx)?, s.geo, notes)?;
    Ok((cube, vec![path.clone()]))
}

fn last_year(cube: &SalesCube, year: Option<i32>) -> Result<i32> {
    match year {
        Some(y) => Ok(y),
        None => cube
            .years()
            .last()
            .copied()
            .ok_or_else(|| Error::Validation("cube is empty".into())),
    }
}

fn years(cube: &SalesCube, year: Option<i32>) -> Vec<i32> {
    match year {
        Some(y) => vec![y],
        None => cube.years().to_vec(),
    }
}

fn series_out(ctx: &Context, series: &[ConcentrationSeries]) -> Result<String> {
    Ok(match ctx.settings.format {
        OutputFormat::Csv => series_to_csv(series),
        OutputFormat::Json => json(&series_to_json(series))?,
    })
}

fn write_rejects(path: &Path, rejects: &[Reject]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(crate::microdata::csv_error)?;
    w.write_record(["line", "estab_id", "year", "reason"]).map_err(crate::microdata::csv_error)?;
    for r in rejects {
        w.write_record([
            r.line.map(|l| l.to_string()).unwrap_or_default(),
            r.estab_id.clone().unwrap_or_default(),
            r.year.map(|y| y.to_string()).unwrap_or_default(),
            r.reason.clone(),
        ])
        .map_err(crate::microdata::csv_error)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn ingest(ctx: &Context, input: &Path, deflators: Option<&Path>, rejects_path: Option<&Path>) -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut inputs = vec![input.to_path_buf()];
    let (records, mut rejects) = load_records(input, &mut notes)?;
    let n_records = records.len();
    let (mut cube, cube_rejects) = prepare_records(ctx, records, &category_map(ctx)?, ctx.settings.geo, &mut notes)?;
    rejects.extend(cube_rejects);
    if let Some(d) = deflators {
        let f = std::fs::File::open(d).map_err(|e| Error::io(d, e))?;
        cube = deflate_sales(&cube, &DeflatorSeries::from_csv(f)?)?;
        inputs.push(d.to_path_buf());
    }
    if let Some(p) = rejects_path {
        write_rejects(p, &rejects)?;
    }
    notes.push(format!("{n_records} record(s) read, {} cube cell(s)", cube.len()));
    let text = match ctx.settings.format {
        OutputFormat::Csv => cube.to_csv_string()?,
        OutputFormat::Json => json(&cube.entries().collect::<Vec<CubeEntry>>())?,
    };
    ctx.emit(text, notes, &inputs)
}

fn hhi(ctx: &Context, source: &Source, year: Option<i32>, weight_year: Option<i32>, measure: &str) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, inputs) = load_cube(ctx, source, &mut notes)?;
    let s = &ctx.settings;
    let ys = years(&cube, year);
    let mut series = if measure == "national" {
        let mut series = ConcentrationSeries::new(s.market_def.as_str(), s.geo.as_str(), "national");
        for &y in &ys {
            series.push(y, national_hhi(&cube, y)?)?;
        }
        series
    } else {
        let weight_year = match s.scheme.as_str() {
            "base" => Some(weight_year.unwrap_or(cube.years()[0])),
            "rst" => Some(weight_year.unwrap_or(*cube.years().last().unwrap())),
            _ => weight_year,
        };
        let scheme = WeightScheme::parse(&s.scheme, weight_year)?;
        let mut series = ConcentrationSeries::new(s.market_def.as_str(), s.geo.as_str(), scheme.to_string());
        for &y in &ys {
            series.push(y, local_hhi_index(&cube, y, scheme)?)?;
        }
        series
    };
    series.values.retain(|_, v| v.is_finite());
    ctx.emit(series_out(ctx, &[series])?, notes, &inputs)
}

fn topn(ctx: &Context, source: &Source, n: usize, year: Option<i32>) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, inputs) = load_cube(ctx, source, &mut notes)?;
    let s = &ctx.settings;
    let mut series = ConcentrationSeries::new(s.market_def.as_str(), s.geo.as_str(), format!("top{n}"));
    for y in years(&cube, year) {
        series.push(y, top_n_index(&cube, y, n)?)?;
    }
    ctx.emit(series_out(ctx, &[series])?, notes, &inputs)
}

fn decompose(ctx: &Context, source: &Source, year: Option<i32>, product: Option<&str>) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, inputs) = load_cube(ctx, source, &mut notes)?;
    let mut reports: Vec<DecompositionReport> = Vec::new();
    for y in years(&cube, year) {
        match product {
            Some(p) => reports.push(decompose_national(&cube, Some(p), y)?),
            None => {
                let (per, all) = decompose_all(&cube, y)?;
                reports.extend(per);
                reports.push(all);
            }
        }
    }
    let worst = reports.iter().map(|r| r.identity_residual().abs()).fold(0.0, f64::max);
    notes.push(format!("largest identity residual {worst:e}"));
    let text = match ctx.settings.format {
        OutputFormat::Csv => reports_to_csv(&reports),
        OutputFormat::Json => json(&reports)?,
    };
    ctx.emit(text, notes, &inputs)
}

#[derive(Serialize)]
struct BreakupRow {
    year: i32,
    national_hhi: f64,
    breakup_hhi: f64,
}

fn breakup(ctx: &Context, source: &Source, year: Option<i32>) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, inputs) = load_cube(ctx, source, &mut notes)?;
    let rows: Vec<BreakupRow> = years(&cube, year)
        .into_iter()
        .map(|y| {
            Ok(BreakupRow {
                year: y,
                national_hhi: national_hhi(&cube, y)?,
                breakup_hhi: breakup_single_market(&cube, y)?,
            })
        })
        .collect::<Result<_>>()?;
    let text = match ctx.settings.format {
        OutputFormat::Csv => {
            let mut out = String::from("year,national_hhi,breakup_hhi\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{}", r.year, r.national_hhi, r.breakup_hhi);
            }
            out
        }
        OutputFormat::Json => json(&rows)?,
    };
    ctx.emit(text, notes, &inputs)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn rank(ctx: &Context, source: &Source, base: i32, target: i32) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, inputs) = load_cube(ctx, source, &mut notes)?;
    let r = rank_preserving(&cube, base, target)?;
    if !r.entrant_only_markets.is_empty() {
        notes.push(format!("{} market(s) filled entirely by entrants", r.entrant_only_markets.len()));
    }
    let text = match ctx.settings.format {
        OutputFormat::Csv => format!(
            "base_year,target_year,actual_base,actual_target,counterfactual_target,expansion_share\n{},{},{},{},{},{}\n",
            r.base_year,
            r.target_year,
            r.actual_base,
            r.actual_target,
            r.counterfactual_target,
            opt(r.expansion_share)
        ),
        OutputFormat::Json => json(&r)?,
    };
    ctx.emit(text, notes, &inputs)
}

#[derive(Serialize)]
struct BoundsRow {
    year: i32,
    nonstore_share: f64,
    hhi_bm: f64,
    lower: f64,
    upper: f64,
}

fn bounds(ctx: &Context, input: &Path, year: Option<i32>) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (records, _) = load_records(input, &mut notes)?;
    let (ns, bm): (Vec<_>, Vec<_>) = records.into_iter().partition(EstablishmentRecord::is_nonstore);
    let map = category_map(ctx)?;
    let (bm_cube, _) = prepare_records(ctx, bm, &map, ctx.settings.geo, &mut notes)?;
    let ns_cube = if ns.is_empty() {
        None
    } else {
        Some(prepare_records(ctx, ns, &map, Geography::National, &mut notes)?.0)
    };
    if let Some(ns) = &ns_cube {
        let mixed = mixed_channel_firms(&bm_cube, ns);
        if !mixed.is_empty() {
            notes.push(format!("{} firm(s) sell through both channels", mixed.len()));
        }
    }
    let mut rows = Vec::new();
    for y in years(&bm_cube, year) {
        let shares = match &ns_cube {
            Some(ns) => nonstore_shares(&bm_cube, ns, y)?,
            None => BTreeMap::new(),
        };
        let b = nonstore_bounds_index(&bm_cube, y, &shares)?;
        rows.push(BoundsRow {
            year: y,
            nonstore_share: b.nonstore_share,
            hhi_bm: b.hhi_bm,
            lower: b.lower,
            upper: b.upper,
        });
    }
    let text = match ctx.settings.format {
        OutputFormat::Csv => {
            let mut out = String::from("year,nonstore_share,hhi_bm,lower,upper\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{},{},{}", r.year, r.nonstore_share, r.hhi_bm, r.lower, r.upper);
            }
            out
        }
        OutputFormat::Json => json(&rows)?,
    };
    ctx.emit(text, notes, &[input.to_path_buf()])
}

#[derive(Serialize)]
struct RstRow {
    base_year: i32,
    target_year: i32,
    cross_section_change: f64,
    rst_delta: f64,
    methodology_gap: f64,
}

fn rst(ctx: &Context, source: &Source, base: i32, target: i32) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, inputs) = load_cube(ctx, source, &mut notes)?;
    let r = RstRow {
        base_year: base,
        target_year: target,
        cross_section_change: cross_section_change(&cube, base, target)?,
        rst_delta: rst_delta(&cube, base, target)?,
        methodology_gap: methodology_gap(&cube, base, target)?,
    };
    let text = match ctx.settings.format {
        OutputFormat::Csv => format!(
            "base_year,target_year,cross_section_change,rst_delta,methodology_gap\n{},{},{},{},{}\n",
            r.base_year, r.target_year, r.cross_section_change, r.rst_delta, r.methodology_gap
        ),
        OutputFormat::Json => json(&r)?,
    };
    ctx.emit(text, notes, &inputs)
}

fn markups_fit(ctx: &Context, source: &Source, margins: &Path) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, mut inputs) = load_cube(ctx, source, &mut notes)?;
    inputs.push(margins.to_path_buf());
    let model = MarkupModel::fit(&cube, &load_margins(margins)?)?;
    let text = match ctx.settings.format {
        OutputFormat::Json => model.to_json()? + "\n",
        OutputFormat::Csv => {
            let mut out = String::from("product,year,mu,hbar,eps,eps_raw,near_singular\n");
            for (p, m) in &model.products {
                for (y, f) in &m.by_year {
                    let _ = writeln!(out, "{p},{y},{},{},{},{},{}", f.mu, f.hbar, f.eps, f.eps_raw, f.near_singular);
                }
            }
            out
        }
    };
    ctx.emit(text, notes, &inputs)
}

#[derive(Serialize)]
struct Implied {
    model: &'static str,
    eps: f64,
    hbar_from: f64,
    hbar_to: f64,
    mu_from: f64,
    mu_to: f64,
    change: f64,
}

fn markups_imply(ctx: &Context, eps: f64, from: f64, to: f64, cournot: bool) -> Result<Outcome> {
    let f = |h| if cournot { cournot_margin(h, eps) } else { ces_product_markup(h, eps) };
    let (mu_from, mu_to) = (f(from)?, f(to)?);
    let r = Implied {
        model: if cournot { "cournot" } else { "ces" },
        eps,
        hbar_from: from,
        hbar_to: to,
        mu_from,
        mu_to,
        change: mu_to - mu_from,
    };
    let text = match ctx.settings.format {
        OutputFormat::Csv => format!(
            "model,eps,hbar_from,hbar_to,mu_from,mu_to,change\n{},{},{},{},{},{},{}\n",
            r.model, r.eps, r.hbar_from, r.hbar_to, r.mu_from, r.mu_to, r.change
        ),
        OutputFormat::Json => json(&r)?,
    };
    ctx.emit(text, Vec::new(), &[])
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn synth_generate(ctx: &Context, economy: Option<&Path>, preset: &str, rows: Option<usize>) -> Result<Outcome> {
    let output = ctx
        .output
        .as_ref()
        .ok_or_else(|| Error::Config("synth generate needs --output".into()))?;
    let mut inputs = Vec::new();
    let mut cfg = match economy {
        Some(p) => {
            inputs.push(p.to_path_buf());
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None if preset == "expansion" => EconomyConfig::expansion_scenario(ctx.settings.seed),
        None => EconomyConfig::default(),
    };
    if economy.is_none() || ctx.seed_set {
        cfg.seed = ctx.settings.seed;
    }
    if let Some(n) = rows {
        cfg = cfg.with_target_rows(n);
    }
    let e = generate_economy(&cfg)?;
    let f = std::fs::File::create(output).map_err(|err| Error::io(output, err))?;
    crate::microdata::write_establishments(std::io::BufWriter::new(f), &e.records)?;
    let meta = sidecar(output, ".meta.json");
    std::fs::write(&meta, json(&e.metadata)?).map_err(|err| Error::io(&meta, err))?;
    let cats = sidecar(output, ".categories.csv");
    let f = std::fs::File::create(&cats).map_err(|err| Error::io(&cats, err))?;
    e.category_map.write_csv(f)?;
    ctx.write_manifest(output, &inputs)?;
    Ok(Outcome {
        stdout: String::new(),
        notes: vec![format!(
            "wrote {} record(s) to {} with {} and {}",
            e.records.len(),
            output.display(),
            meta.display(),
            cats.display()
        )],
    })
}

fn equilibrium(ctx: &Context, costs: &[f64], eps: f64) -> Result<Outcome> {
    let m = solve_cournot_market(costs, eps)?;
    let text = match ctx.settings.format {
        OutputFormat::Csv => {
            let mut out = String::from("firm,cost,share,price,markup\n");
            for i in 0..costs.len() {
                let _ = writeln!(out, "{},{},{},{},{}", i + 1, m.costs[i], m.shares[i], m.prices[i], m.markups[i]);
            }
            out
        }
        OutputFormat::Json => json(&m)?,
    };
    ctx.emit(text, vec![format!("converged in {} iteration(s), residual {:e}", m.iterations, m.residual)], &[])
}

#[derive(Serialize)]
struct OracleRow {
    metric: &'static str,
    closed_form: f64,
    estimate: Option<McEstimate>,
    within_4_sigma: Option<bool>,
}

fn oracle(ctx: &Context, source: &Source, year: Option<i32>, product: Option<&str>, samples: u64) -> Result<Outcome> {
    let mut notes = Vec::new();
    let (cube, inputs) = load_cube(ctx, source, &mut notes)?;
    let y = last_year(&cube, year)?;
    let r = decompose_national(&cube, product, y)?;
    let s = mc_pair_statistics(&cube, product, y, samples, ctx.settings.seed)?;
    let row = |metric, closed_form: f64, estimate: Option<McEstimate>| OracleRow {
        metric,
        closed_form,
        within_4_sigma: estimate.map(|e| e.within(closed_form, 4.0)),
        estimate,
    };
    let mut rows = vec![
        row("national_hhi", r.national_hhi, Some(s.same_firm)),
        row("collocation", r.collocation, Some(s.same_location)),
        row("local_conditional", r.local_conditional, s.same_firm_given_same_location),
    ];
    if !r.degenerate {
        rows.push(row("cross_market_conditional", r.cross_market_conditional, s.same_firm_given_cross_location));
    }
    let failures = rows.iter().filter(|r| r.within_4_sigma == Some(false)).count();
    if failures > 0 {
        notes.push(format!("{failures} metric(s) outside 4 sigma"));
    }
    let text = match ctx.settings.format {
        OutputFormat::Csv => {
            let mut out = String::from("metric,closed_form,estimate,std_error,n,within_4_sigma\n");
            for r in &rows {
                let (e, se, n) = r.estimate.map_or((None, None, None), |e| (Some(e.estimate), Some(e.std_error), Some(e.n)));
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.metric,
                    r.closed_form,
                    opt(e),
                    opt(se),
                    n.map(|n| n.to_string()).unwrap_or_default(),
                    r.within_4_sigma.map(|b| b.to_string()).unwrap_or_default()
                );
            }
            out
        }
        OutputFormat::Json => json(&rows)?,
    };
    ctx.emit(text, notes, &inputs)
}
