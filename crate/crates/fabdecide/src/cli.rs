//! Command-line front end. Every command that has an HTTP counterpart builds
//! a [`ScenarioRequest`] and goes through the same [`Api`] handler, so
//! `--json` output matches the service byte for byte once keys are ordered.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand};
use fabdecide_core::cost::{self, ShuttleWait};
use fabdecide_core::money::{convert, format_micros};
use fabdecide_core::selection::{SelectionReport, SelectionStatus};
use fabdecide_core::{
    load_catalog, seed, AddOnKind, Catalog, Currency, DesignSpec, Money, RateTable, TechnologyNode, Weights,
    YieldModel,
};
use rust_decimal::Decimal;
use serde_json::{json, Value};

use crate::api::{
    to_value, Api, ApiError, BreakevenEstimate, MpwEstimate, ProductionEstimate, ScenarioRequest,
    WaferOverrides, YieldOverrides,
};
use crate::rates::{load_snapshot, RateMode, RateService, RateSourceConfig};
use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "fabdecide", version, about = "Chip fabrication cost estimates and CMOS technology selection")]
pub struct Cli {
    /// Print the same JSON the HTTP API returns.
    #[arg(long, global = true)]
    pub json: bool,
    /// Technology catalog file (defaults to the bundled catalog).
    #[arg(long, global = true, env = "FABDECIDE_CATALOG", value_name = "FILE")]
    pub catalog: Option<PathBuf>,
    /// Exchange-rate snapshot file (defaults to the bundled snapshot).
    #[arg(long, global = true, env = "FABDECIDE_RATES", value_name = "FILE")]
    pub rates: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect the technology catalog.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Price an MPW seat or a dedicated production run.
    #[command(subcommand)]
    Estimate(EstimateCommand),
    /// Smallest volume at which a dedicated mask set beats MPW seats.
    Breakeven(BreakevenArgs),
    /// Rank feasible technologies for a design spec.
    Select(SelectArgs),
    /// Expected wait for the next MPW shuttle.
    Wait(WaitArgs),
    /// Convert an amount with the loaded rate table.
    Convert(ConvertArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    /// List technologies, optionally filtered (e.g. --where 'node_nm<=65').
    List {
        #[arg(long = "where", value_name = "FILTER")]
        filters: Vec<String>,
    },
    /// Show one technology.
    Show { id: String },
}

#[derive(Debug, Subcommand)]
pub enum EstimateCommand {
    Mpw(MpwArgs),
    Production(ProductionArgs),
}

#[derive(Debug, Args)]
pub struct WaferArgs {
    /// Wafer diameter in mm (defaults to the technology's).
    #[arg(long, value_parser = decimal)]
    pub diameter: Option<Decimal>,
    /// Edge exclusion in mm.
    #[arg(long, value_parser = decimal)]
    pub edge: Option<Decimal>,
    /// Scribe lane width in mm.
    #[arg(long, value_parser = decimal)]
    pub scribe: Option<Decimal>,
}

impl WaferArgs {
    fn overrides(&self) -> Option<WaferOverrides> {
        let o = WaferOverrides { diameter_mm: self.diameter, edge_exclusion_mm: self.edge, scribe_mm: self.scribe };
        (o != WaferOverrides::default()).then_some(o)
    }
}

#[derive(Debug, Args)]
pub struct YieldArgs {
    /// Yield model: poisson or murphy.
    #[arg(long)]
    pub model: Option<YieldModel>,
    /// Defect density per mm².
    #[arg(long, value_parser = decimal)]
    pub d0: Option<Decimal>,
}

impl YieldArgs {
    fn overrides(&self) -> Option<YieldOverrides> {
        let o = YieldOverrides { model: self.model, d0_per_mm2: self.d0 };
        (o != YieldOverrides::default()).then_some(o)
    }
}

#[derive(Debug, Args)]
pub struct MpwArgs {
    #[arg(long)]
    pub tech: String,
    /// Die area in mm².
    #[arg(long, value_parser = decimal)]
    pub area: Decimal,
    /// Process add-on (HV, NVM, OPTO, SOI); repeatable.
    #[arg(long = "addon")]
    pub addons: Vec<AddOnKind>,
    /// Also show the price in this currency.
    #[arg(long, value_parser = currency)]
    pub currency: Option<Currency>,
}

#[derive(Debug, Args)]
pub struct ProductionArgs {
    #[arg(long)]
    pub tech: String,
    #[arg(long, value_parser = decimal)]
    pub area: Decimal,
    /// Good dies required.
    #[arg(long)]
    pub volume: u64,
    #[command(flatten)]
    pub wafer: WaferArgs,
    #[command(flatten)]
    pub yield_args: YieldArgs,
    /// EDA and other NRE, in the technology's currency.
    #[arg(long, value_parser = decimal)]
    pub eda_nre: Option<Decimal>,
    /// Packaging cost per unit, in the technology's currency.
    #[arg(long, value_parser = decimal)]
    pub packaging: Option<Decimal>,
    #[arg(long, value_parser = currency)]
    pub currency: Option<Currency>,
}

#[derive(Debug, Args)]
pub struct BreakevenArgs {
    #[arg(long)]
    pub tech: String,
    #[arg(long, value_parser = decimal)]
    pub area: Decimal,
    #[arg(long = "addon")]
    pub addons: Vec<AddOnKind>,
    #[command(flatten)]
    pub wafer: WaferArgs,
    #[command(flatten)]
    pub yield_args: YieldArgs,
    /// Use this many good dies per wafer instead of the geometry and yield estimate.
    #[arg(long)]
    pub good_dies: Option<f64>,
    /// Largest volume considered.
    #[arg(long)]
    pub scan_limit: Option<u64>,
    /// Also report both totals at this volume; repeatable.
    #[arg(long = "sample")]
    pub samples: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Design spec JSON file.
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    /// Five comma-separated weights: unit cost, complexity, passives, f_max, time to market.
    #[arg(long, value_parser = weights)]
    pub weights: Option<Weights>,
    /// Currency to compare unit costs in.
    #[arg(long, value_parser = currency)]
    pub currency: Option<Currency>,
    #[arg(long, value_parser = decimal)]
    pub edge: Option<Decimal>,
    #[arg(long, value_parser = decimal)]
    pub scribe: Option<Decimal>,
    #[command(flatten)]
    pub yield_args: YieldArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["tech", "shuttles"])))]
pub struct WaitArgs {
    #[arg(long)]
    pub tech: Option<String>,
    /// Shuttles per year.
    #[arg(long)]
    pub shuttles: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Amount in major units, e.g. 1100 or 31200.00.
    #[arg(long, value_parser = decimal)]
    pub amount: Decimal,
    #[arg(long, value_parser = currency)]
    pub from: Currency,
    #[arg(long, value_parser = currency)]
    pub to: Currency,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory served under /ui.
    #[arg(long, value_name = "DIR")]
    pub ui_dir: Option<PathBuf>,
    /// Fetch rates from this URL, falling back to the snapshot.
    #[arg(long, value_name = "URL")]
    pub live_rates: Option<String>,
    #[arg(long, default_value_t = 2000)]
    pub rates_timeout_ms: u64,
    #[arg(long, default_value_t = 300)]
    pub rates_ttl_s: u64,
}

fn decimal(s: &str) -> Result<Decimal, String> {
    Decimal::from_str(s).or_else(|_| Decimal::from_scientific(s)).map_err(|_| format!("not a number: {s:?}"))
}

fn currency(s: &str) -> Result<Currency, String> {
    Currency::new(&s.to_ascii_uppercase()).map_err(|e| e.to_string())
}

fn weights(s: &str) -> Result<Weights, String> {
    let parts = s.split(',').map(|p| decimal(p.trim())).collect::<Result<Vec<_>, _>>()?;
    let values: [Decimal; 5] = parts.try_into().map_err(|_| "expected five comma-separated weights".to_string())?;
    Weights::new(values).map_err(|e| e.to_string())
}

/// Failure of a CLI invocation, with its exit code.
#[derive(Debug)]
enum Failure {
    Api(ApiError),
    Usage(String),
    Internal(String),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Api(e)
    }
}

struct Context {
    json: bool,
    api: Api,
    rates: RateTable,
}

fn load_catalog_file(path: Option<&Path>) -> Result<Catalog, Failure> {
    let Some(path) = path else { return Ok(seed::catalog()) };
    let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot read catalog {}: {e}", path.display())))?;
    load_catalog(file).map_err(|e| Failure::Usage(format!("catalog {}: {e}", path.display())))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 2 for usage or validation
/// errors, 1 for internal failures.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let rendered = e.render().to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{line}");
            return 2;
        }
    };
    let json = cli.json;
    match run(cli, out) {
        Ok(()) => 0,
        Err(Failure::Api(e)) => {
            if json {
                let _ = writeln!(out, "{}", pretty(&e.to_json()));
            }
            let _ = writeln!(err, "error: {}", e.message);
            if e.status >= 500 {
                1
            } else {
                2
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Internal(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let catalog = load_catalog_file(cli.catalog.as_deref())?;
    if let Command::Serve(args) = cli.command {
        return serve(args, catalog, cli.rates);
    }
    let rates = load_snapshot(cli.rates.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
    let ctx = Context { json: cli.json, api: Api::new(catalog), rates };
    let text = match cli.command {
        Command::Catalog(c) => catalog_command(&ctx, c)?,
        Command::Estimate(EstimateCommand::Mpw(a)) => mpw(&ctx, a)?,
        Command::Estimate(EstimateCommand::Production(a)) => production(&ctx, a)?,
        Command::Breakeven(a) => breakeven(&ctx, a)?,
        Command::Select(a) => select(&ctx, a)?,
        Command::Wait(a) => wait(&ctx, a)?,
        Command::Convert(a) => convert_command(&ctx, a)?,
        Command::Serve(_) => unreachable!("handled above"),
    };
    out.write_all(text.as_bytes()).map_err(|e| Failure::Internal(e.to_string()))?;
    if !text.ends_with('\n') {
        out.write_all(b"\n").map_err(|e| Failure::Internal(e.to_string()))?;
    }
    Ok(())
}

fn catalog_command(ctx: &Context, c: CatalogCommand) -> Result<String, Failure> {
    match c {
        CatalogCommand::List { filters } => {
            let v = ctx.api.technologies(&filters)?;
            if ctx.json {
                return Ok(pretty(&v));
            }
            let nodes: Vec<TechnologyNode> = serde_json::from_value(v["technologies"].clone())
                .map_err(|e| Failure::Internal(e.to_string()))?;
            Ok(render_catalog(&nodes))
        }
        CatalogCommand::Show { id } => {
            let v = ctx.api.technology(&id)?;
            if ctx.json {
                return Ok(pretty(&v));
            }
            let node: TechnologyNode = serde_json::from_value(v).map_err(|e| Failure::Internal(e.to_string()))?;
            Ok(render_node(&node))
        }
    }
}

fn render_catalog(nodes: &[TechnologyNode]) -> String {
    let mut s = format!(
        "{:<12} {:<16} {:>7} {:>6} {:>10} {:>20} {:>9}\n",
        "id", "foundry", "node", "core V", "f_max Hz", "MPW per mm²", "shuttles"
    );
    for n in nodes {
        s += &format!(
            "{:<12} {:<16} {:>5}nm {:>6} {:>10} {:>20} {:>9}\n",
            n.id,
            n.foundry,
            n.node_nm,
            n.core_voltage_v.to_string(),
            n.f_max_hz.normalize().to_string(),
            n.mpw_price_per_mm2.to_string(),
            n.shuttles_per_year
        );
    }
    s
}

fn render_node(n: &TechnologyNode) -> String {
    let addons = if n.addons.is_empty() {
        "none".to_string()
    } else {
        n.addons.iter().map(|a| format!("{} (+{}/mm²)", a.kind, a.surcharge_per_mm2)).collect::<Vec<_>>().join(", ")
    };
    let rows = [
        ("id", n.id.clone()),
        ("foundry", n.foundry.clone()),
        ("node", format!("{} nm", n.node_nm)),
        ("core / io voltage", format!("{} V / {} V", n.core_voltage_v, n.io_voltage_v)),
        ("MIM cap density", format!("{} fF/µm²", n.mim_cap_density_ff_um2)),
        ("f_max", format!("{} Hz", n.f_max_hz.normalize())),
        ("MPW price", format!("{} per mm², min {} mm²", n.mpw_price_per_mm2, n.min_area_mm2)),
        ("samples per seat", n.samples_per_seat.to_string()),
        ("mask set", n.mask_cost.to_string()),
        ("wafer", format!("{} ({} mm)", n.wafer_cost, n.wafer_diameter_mm)),
        ("shuttles per year", n.shuttles_per_year.to_string()),
        ("add-ons", addons),
        ("illustrative", n.illustrative.to_string()),
    ];
    rows.iter().map(|(k, v)| format!("{k:<18} {v}\n")).collect()
}

fn mpw(ctx: &Context, a: MpwArgs) -> Result<String, Failure> {
    let req = ScenarioRequest {
        technology_id: Some(a.tech),
        die_area_mm2: Some(a.area),
        addons: a.addons,
        currency_target: a.currency,
        ..Default::default()
    };
    let r: MpwEstimate = ctx.api.estimate_mpw(&req, &ctx.rates)?;
    if ctx.json {
        return Ok(pretty(&to_value(&r)?));
    }
    let mut s = format!("{}\n", r.seat_cost);
    if let Some(c) = &r.converted {
        s += &format!("{} at {} ({})\n", c.amount, c.rate.rate, c.rate.as_of);
    }
    s += &format!("billed area {} mm², {} samples\n", r.billed_area_mm2, r.samples_per_seat);
    Ok(s)
}

fn major(ctx: &Context, tech: &str, amount: Option<Decimal>) -> Result<Option<Money>, Failure> {
    let Some(amount) = amount else { return Ok(None) };
    let currency = ctx.api.catalog().require(tech).map_err(ApiError::from)?.mask_cost.currency;
    Money::from_major(amount, currency).map(Some).map_err(|e| Failure::Api(e.into()))
}

fn production(ctx: &Context, a: ProductionArgs) -> Result<String, Failure> {
    let req = ScenarioRequest {
        eda_nre: major(ctx, &a.tech, a.eda_nre)?,
        packaging_per_unit: major(ctx, &a.tech, a.packaging)?,
        technology_id: Some(a.tech),
        die_area_mm2: Some(a.area),
        volume: Some(a.volume),
        wafer: a.wafer.overrides(),
        yield_overrides: a.yield_args.overrides(),
        currency_target: a.currency,
        ..Default::default()
    };
    let r: ProductionEstimate = ctx.api.estimate_production(&req, &ctx.rates)?;
    if ctx.json {
        return Ok(pretty(&to_value(&r)?));
    }
    let b = &r.breakdown;
    let mut rows = vec![
        ("technology", b.technology_id.clone()),
        ("volume", b.volume.to_string()),
        (
            "wafer",
            format!("{} mm, edge {} mm, scribe {} mm", r.wafer.diameter_mm, r.wafer.edge_exclusion_mm, r.wafer.scribe_mm),
        ),
        ("gross dies/wafer", b.gross_dies_per_wafer.to_string()),
        ("yield", format!("{:.6} ({}, D0 {}/mm²)", b.yield_fraction, r.yield_params.model, r.yield_params.d0_per_mm2)),
        ("good dies/wafer", format!("{:.4}", b.good_dies_per_wafer)),
        ("wafers", b.wafers_used.to_string()),
        ("NRE", b.nre.to_string()),
        ("wafer total", b.wafer_total.to_string()),
        ("packaging total", b.packaging_total.to_string()),
        ("total", b.total.to_string()),
        ("unit cost", format_micros(b.unit_cost_micro, b.currency)),
    ];
    if let Some(c) = &r.converted {
        rows.push(("converted total", c.total.to_string()));
        rows.push(("converted unit", format_micros(c.unit_cost_micro, c.total.currency)));
        rows.push(("rate", format!("{} ({})", c.rate.rate, c.rate.as_of)));
    }
    Ok(rows.iter().map(|(k, v)| format!("{k:<17} {v}\n")).collect())
}

fn breakeven(ctx: &Context, a: BreakevenArgs) -> Result<String, Failure> {
    let req = ScenarioRequest {
        technology_id: Some(a.tech),
        die_area_mm2: Some(a.area),
        addons: a.addons,
        wafer: a.wafer.overrides(),
        yield_overrides: a.yield_args.overrides(),
        good_dies_per_wafer: a.good_dies,
        scan_limit: a.scan_limit,
        sample_volumes: a.samples,
        ..Default::default()
    };
    let r: BreakevenEstimate = ctx.api.breakeven(&req)?;
    if ctx.json {
        return Ok(pretty(&to_value(&r)?));
    }
    let rep = &r.report;
    let mut s = match rep.breakeven_volume {
        Some(v) => format!("break-even volume  {v}\n"),
        None => format!("no break-even up to {} units\n", rep.scan_limit),
    };
    s += &format!("MPW total          {}\n", rep.mpw_total_at_breakeven);
    s += &format!("dedicated total    {}\n", rep.dedicated_total_at_breakeven);
    s += &format!("seat cost          {} per {} samples\n", rep.seat_cost, rep.samples_per_seat);
    s += &format!("good dies/wafer    {:.4}\n", rep.good_dies_per_wafer);
    for p in &r.curve {
        s += &format!("at {:<15} MPW {}  dedicated {}\n", p.volume, p.mpw_total, p.dedicated_total);
    }
    Ok(s)
}

fn read_spec(path: &Path) -> Result<DesignSpec, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read spec {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::Usage(format!("malformed spec {}: {e}", path.display())))
}

fn select(ctx: &Context, a: SelectArgs) -> Result<String, Failure> {
    let wafer = WaferOverrides { diameter_mm: None, edge_exclusion_mm: a.edge, scribe_mm: a.scribe };
    let req = ScenarioRequest {
        spec: Some(read_spec(&a.spec)?),
        weights: a.weights,
        currency_target: a.currency,
        wafer: (wafer != WaferOverrides::default()).then_some(wafer),
        yield_overrides: a.yield_args.overrides(),
        ..Default::default()
    };
    let r = ctx.api.select(&req, &ctx.rates)?;
    if ctx.json {
        return Ok(pretty(&to_value(&r)?));
    }
    Ok(render_selection(&r))
}

fn render_selection(r: &SelectionReport) -> String {
    match r.status {
        SelectionStatus::NoFeasibleTechnology => return "no feasible technology\n".into(),
        SelectionStatus::Dictated => {
            let b = r.dictated.as_ref().expect("dictated report carries a cost");
            return format!(
                "node dictated: {}\ntotal {}\nunit cost {}\n",
                b.technology_id,
                b.total,
                format_micros(b.unit_cost_micro, b.currency)
            );
        }
        SelectionStatus::Ranked => {}
    }
    let currency = r.comparison_currency.expect("ranked report has a comparison currency");
    let mut s = format!(
        "{:>4} {:<12} {:>7} {:>18} {:>10} {:>8} {:>10} {:>9}\n",
        "rank", "technology", "score", "unit cost", "complexity", "cap", "f_max Hz", "wait d"
    );
    for c in &r.candidates {
        let unit = i64::try_from(c.criteria.unit_cost_micro.mantissa()).unwrap_or(i64::MAX);
        s += &format!(
            "{:>4} {:<12} {:>7.4} {:>18} {:>10} {:>8} {:>10} {:>9}\n",
            c.rank,
            c.technology_id,
            c.score,
            format_micros(unit, currency),
            c.criteria.complexity_index.round_dp(4).normalize().to_string(),
            c.criteria.cap_density.normalize().to_string(),
            c.criteria.f_max_hz.normalize().to_string(),
            c.criteria.wait_days.round_dp(2).to_string(),
        );
    }
    for note in &r.notes {
        s += &format!("note: {note}\n");
    }
    s
}

fn wait(ctx: &Context, a: WaitArgs) -> Result<String, Failure> {
    let (technology_id, shuttles) = match (a.tech, a.shuttles) {
        (Some(id), None) => {
            let tech = ctx.api.catalog().require(&id).map_err(ApiError::from)?;
            (Some(tech.id.clone()), tech.shuttles_per_year)
        }
        (None, Some(n)) => (None, n),
        _ => return Err(Failure::Usage("give either --tech or --shuttles".into())),
    };
    let days = cost::expected_shuttle_wait(shuttles).map_err(ApiError::from)?;
    let result = ShuttleWait { shuttles_per_year: shuttles, expected_wait_days: days };
    if ctx.json {
        let mut v = to_value(&result)?;
        v["technology_id"] = json!(technology_id);
        return Ok(pretty(&v));
    }
    Ok(format!("{} days\n", days.round_dp(4)))
}

fn convert_command(ctx: &Context, a: ConvertArgs) -> Result<String, Failure> {
    let amount = Money::from_major(a.amount, a.from).map_err(ApiError::from)?;
    let rate = ctx.rates.require(a.from, a.to).map_err(ApiError::from)?;
    let converted = convert(&amount, &rate).map_err(ApiError::from)?;
    if ctx.json {
        return Ok(pretty(&json!({ "amount": amount, "converted": converted, "rate": rate })));
    }
    Ok(format!("{converted}\n"))
}

fn serve(args: ServeArgs, catalog: Catalog, snapshot: Option<PathBuf>) -> Result<(), Failure> {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let config = RateSourceConfig {
        mode: if args.live_rates.is_some() { RateMode::Live } else { RateMode::Snapshot },
        snapshot_path: snapshot,
        live_url: args.live_rates,
        timeout_ms: args.rates_timeout_ms,
        cache_ttl_s: args.rates_ttl_s,
    };
    if let Some(dir) = &args.ui_dir {
        if !dir.is_dir() {
            return Err(Failure::Usage(format!("--ui-dir {} is not a directory", dir.display())));
        }
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.to_string()))?;
    runtime.block_on(async {
        let rates = RateService::new(config).map_err(|e| Failure::Usage(e.to_string()))?;
        let state = AppState { api: Api::new(catalog), rates: Arc::new(rates) };
        server::serve(SocketAddr::new(args.host, args.port), state, args.ui_dir)
            .await
            .map_err(|e| Failure::Internal(format!("server failed: {e}")))
    })
}
