//! Autonomous-vehicle case study: a generated network of eleven components
//! and its requirement suite.
//!
//! Time unit: 1 tu = 20 ms. Wheel speeds are two aggregate clocks, `wvl`
//! (left pair) and `wvr` (right pair).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dsl::{parse_model, parse_query_file, ParseError};
use crate::expr::fmt_real;
use crate::model::Model;
use crate::query::{NamedQuery, QueryFile};

#[cfg(test)]
mod tests;

/// Sign kinds in the order of `AvConfig::sign_weights`.
pub const SIGNS: [&str; 8] = ["straight", "max_low", "max_high", "min_low", "min_high", "right", "left", "stop"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvConfig {
    pub max_limits: [i64; 2],
    pub min_limits: [i64; 2],
    pub acceleration: f64,
    pub sign_weights: [u32; 8],
    pub camera_period: f64,
    pub camera_jitter: f64,
    pub camera_exec_upper: f64,
    pub recognition_lower: f64,
    pub recognition_upper: f64,
    /// Window in which the controller reads the four wheel speeds after a sign.
    pub read_window: f64,
    pub sync_tolerance: f64,
    pub end_to_end_lower: f64,
    pub end_to_end_upper: f64,
    pub turn_phase: f64,
    pub turn_hold_lower: f64,
    pub turn_hold_upper: f64,
    /// Entry speed at or above which a turn slows the inner wheels.
    pub turn_threshold: f64,
    /// Cruise target is the speed limit minus this margin.
    pub speed_margin: f64,
    pub initial_speed: f64,
    pub brake_exit_rate: f64,
    pub const_speed_rate: f64,
    pub turning_rate: f64,
    pub up_down_rate: f64,
    pub braking_rate: f64,
    pub camera_energy_rate: f64,
    pub recognition_energy_rate: f64,
    /// Seconds per time unit, used to scale speed-proportional energy rates.
    pub tu_seconds: f64,
    pub refined: bool,
}

impl Default for AvConfig {
    fn default() -> Self {
        AvConfig {
            max_limits: [100, 120],
            min_limits: [70, 80],
            acceleration: 8.0,
            sign_weights: [30, 10, 10, 10, 10, 10, 10, 10],
            camera_period: 35.0,
            camera_jitter: 5.0,
            camera_exec_upper: 5.0,
            recognition_lower: 10.0,
            recognition_upper: 20.0,
            read_window: 1.5,
            sync_tolerance: 2.0,
            end_to_end_lower: 10.0,
            end_to_end_upper: 30.0,
            turn_phase: 2.0,
            turn_hold_lower: 36.0,
            turn_hold_upper: 66.0,
            turn_threshold: 70.0,
            speed_margin: 10.0,
            initial_speed: 30.0,
            brake_exit_rate: 10.0,
            const_speed_rate: 1.0,
            turning_rate: 1.4,
            up_down_rate: 8.0,
            braking_rate: 29.5,
            camera_energy_rate: 0.5,
            recognition_energy_rate: 0.2,
            tu_seconds: 0.02,
            refined: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AvConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("config file: {0}")]
    Toml(String),
}

impl AvConfig {
    pub fn unrefined() -> Self {
        AvConfig {
            refined: false,
            ..AvConfig::default()
        }
    }

    /// Reads `key = value` lines; missing keys keep their defaults.
    pub fn from_toml(src: &str) -> Result<Self, AvConfigError> {
        let cfg: AvConfig = toml::from_str(src).map_err(|e| AvConfigError::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AvConfigError> {
        let bad = |m: &str| Err(AvConfigError::Invalid(m.into()));
        let rates = [
            self.const_speed_rate,
            self.turning_rate,
            self.up_down_rate,
            self.braking_rate,
            self.camera_energy_rate,
            self.recognition_energy_rate,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("energy rates must be positive");
        }
        if !(self.braking_rate > self.up_down_rate
            && self.up_down_rate > self.turning_rate
            && self.turning_rate > self.const_speed_rate)
        {
            return bad("need braking_rate > up_down_rate > turning_rate > const_speed_rate");
        }
        if !(self.camera_jitter >= 0.0 && self.camera_jitter < self.camera_period) {
            return bad("camera jitter must lie in [0, period)");
        }
        if self.sign_weights.contains(&0) {
            return bad("sign weights must be positive");
        }
        let positive = [
            self.acceleration,
            self.camera_exec_upper,
            self.read_window,
            self.turn_phase,
            self.tu_seconds,
            self.brake_exit_rate,
        ];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return bad("acceleration, durations and tu_seconds must be positive");
        }
        if !(0.0 <= self.recognition_lower && self.recognition_lower <= self.recognition_upper) {
            return bad("recognition bounds out of order");
        }
        if !(0.0 <= self.turn_hold_lower && self.turn_hold_lower <= self.turn_hold_upper) {
            return bad("turn hold bounds out of order");
        }
        if self.initial_speed < 0.0 || self.speed_margin < 0.0 {
            return bad("speeds must be nonnegative");
        }
        if self.min_limits.iter().chain(&self.max_limits).any(|l| *l <= 0) {
            return bad("speed limits must be positive");
        }
        Ok(())
    }

    pub fn total_sign_weight(&self) -> u32 {
        self.sign_weights.iter().sum()
    }
}

/// Channels every component and monitor can refer to.
const CHANNELS: &[&str] = &[
    "gen", "cam_start", "cam_done", "sig_start", "sig_done", "fl_spd", "fr_spd", "rl_spd", "rr_spd", "go_const",
    "go_up", "go_down", "go_left", "go_right", "go_stop", "accel", "decel", "hold", "holdL", "holdR", "incL",
    "incR", "decL", "decR", "reached", "turn_done", "stopped",
];

/// Component names in system order.
pub const COMPONENTS: [&str; 11] = [
    "SignSource", "Camera", "SignRec", "Ctrl", "Straight", "TurnLeft", "TurnRight", "Stop", "SpeedL", "SpeedR",
    "energy",
];

struct Tpl {
    out: String,
}

impl Tpl {
    fn new(name: &str, locals: &str) -> Self {
        let mut out = format!("template {name}() {{\n");
        if !locals.is_empty() {
            writeln!(out, "  {locals}").unwrap();
        }
        Tpl { out }
    }

    fn loc(&mut self, s: &str) {
        writeln!(self.out, "  {s}").unwrap();
    }

    fn edge(&mut self, from: &str, to: &str, body: &str) {
        writeln!(self.out, "  {from} -> {to} {{ {body} }}").unwrap();
    }

    fn done(mut self, dst: &mut String) {
        self.out.push_str("}\n\n");
        dst.push_str(&self.out);
    }
}

/// DSL text of the vehicle network.
pub fn av_source(cfg: &AvConfig) -> String {
    let r = fmt_real;
    let mut s = String::new();
    writeln!(
        s,
        "// autonomous vehicle, {} model; 1 tu = 20 ms\n",
        if cfg.refined { "refined" } else { "unrefined" }
    )
    .unwrap();
    writeln!(s, "broadcast chan {};\n", CHANNELS.join(", ")).unwrap();
    writeln!(
        s,
        "int signType = 0;\nint speedh = {};\nint speedl = {};\n\
         // 0 const, 1 up, 2 down, 3 left, 4 right, 5 braking, 6 stopped\n\
         int mode = 0;\nint pmode = 0;\nreal target = {v};\nreal entry_speed = {v};\nbool stop_pending = false;\n\
         clock wvl = {v};\nclock wvr = {v};\ndefine average_speed = (wvl + wvr) / 2;\n",
        cfg.max_limits[1],
        cfg.min_limits[0],
        v = r(cfg.initial_speed)
    )
    .unwrap();

    sign_source(cfg, &mut s);
    camera(cfg, &mut s);
    sign_rec(cfg, &mut s);
    controller(cfg, &mut s);
    straight(&mut s);
    turn(cfg, &mut s, true);
    turn(cfg, &mut s, false);
    stop(cfg, &mut s);
    speed(cfg, &mut s, "L", "wvl");
    speed(cfg, &mut s, "R", "wvr");
    energy(cfg, &mut s);
    writeln!(s, "system {};", COMPONENTS.join(", ")).unwrap();
    s
}

fn sign_source(cfg: &AvConfig, s: &mut String) {
    let w = cfg.sign_weights;
    let mut t = Tpl::new("SignSource", "");
    t.loc("init loc idle {}");
    let updates = [
        "signType := 0".to_string(),
        format!("signType := 1, speedh := {}", cfg.max_limits[0]),
        format!("signType := 1, speedh := {}", cfg.max_limits[1]),
        format!("signType := 2, speedl := {}", cfg.min_limits[0]),
        format!("signType := 2, speedl := {}", cfg.min_limits[1]),
        "signType := 3".to_string(),
        "signType := 4".to_string(),
        "signType := 5".to_string(),
    ];
    for (i, u) in updates.iter().enumerate() {
        t.edge("idle", "idle", &format!("sync gen?; weight {}; update {u};", w[i]));
    }
    t.done(s);
}

fn camera(cfg: &AvConfig, s: &mut String) {
    let r = fmt_real;
    let mut t = Tpl::new("Camera", "clock x; clock camera_en;");
    t.loc(&format!(
        "init loc wait {{ inv x <= {}; rate camera_en = 0; }}",
        r(cfg.camera_period + cfg.camera_jitter)
    ));
    t.loc(&format!(
        "loc capture {{ inv x <= {}; rate camera_en = {}; }}",
        r(cfg.camera_exec_upper),
        r(cfg.camera_energy_rate)
    ));
    t.edge(
        "wait",
        "capture",
        &format!(
            "guard x >= {}; sync cam_start!; update x := 0, camera_en := 0;",
            r(cfg.camera_period - cfg.camera_jitter)
        ),
    );
    t.edge("capture", "wait", "sync cam_done!;");
    t.done(s);
}

fn sign_rec(cfg: &AvConfig, s: &mut String) {
    let r = fmt_real;
    let mut t = Tpl::new("SignRec", "clock x; clock signreg_en;");
    t.loc("init loc idle { rate signreg_en = 0; }");
    t.loc("committed loc read { rate signreg_en = 0; }");
    t.loc(&format!(
        "loc exec {{ inv x <= {}; rate signreg_en = {}; }}",
        r(cfg.recognition_upper),
        r(cfg.recognition_energy_rate)
    ));
    t.loc("committed loc write { rate signreg_en = 0; }");
    t.edge("idle", "read", "sync cam_done?;");
    t.edge("read", "exec", "sync sig_start!; update x := 0, signreg_en := 0;");
    t.edge("exec", "write", &format!("guard x >= {}; sync gen!;", r(cfg.recognition_lower)));
    t.edge("write", "idle", "sync sig_done!;");
    t.done(s);
}

fn controller(cfg: &AvConfig, s: &mut String) {
    let r = fmt_real;
    let mut t = Tpl::new(
        "Ctrl",
        "clock t; clock since; clock left_clk; clock right_clk; int reading = 0;",
    );
    let modes = ["straight", "turn_left", "turn_right", "stop"];
    for (i, m) in modes.iter().enumerate() {
        t.loc(&format!(
            "{}loc {m} {{ inv t <= {}; rate t = reading > 0 ? 1 : 0; }}",
            if i == 0 { "init " } else { "" },
            r(cfg.read_window)
        ));
    }
    t.loc("committed loc ctrl {}");
    if cfg.refined {
        t.loc("committed loc after_turn {}");
    }
    for m in modes {
        t.edge(m, m, "guard reading == 0; sync sig_done?; update reading := 1, t := 0;");
        for (i, ch) in ["fl_spd", "fr_spd", "rl_spd"].iter().enumerate() {
            t.edge(
                m,
                m,
                &format!("guard reading == {}; sync {ch}!; update reading := {};", i + 1, i + 2),
            );
        }
        t.edge(
            m,
            "ctrl",
            "guard reading == 4; sync rr_spd!; update reading := 0, pmode := mode, since := 0;",
        );
    }
    let margin = r(cfg.speed_margin);
    let up = format!("sync go_up!; update mode := 1, target := speedh - {margin};");
    // decision table; guards partition (pmode, signType)
    let rows: Vec<(String, &str, String)> = vec![
        ("pmode <= 2 && signType == 0".into(), "straight", String::new()),
        (
            "pmode <= 2 && signType == 1 && wvl > speedh".into(),
            "straight",
            format!("sync go_down!; update mode := 2, target := speedh - {margin};"),
        ),
        (
            format!("pmode == 1 && signType == 1 && wvl <= speedh && wvl >= speedh - {margin}"),
            "straight",
            "sync go_const!; update mode := 0;".into(),
        ),
        (
            format!("pmode == 1 && signType == 1 && wvl < speedh - {margin}"),
            "straight",
            up.clone(),
        ),
        ("pmode != 1 && pmode <= 2 && signType == 1 && wvl <= speedh".into(), "straight", String::new()),
        ("pmode != 1 && pmode <= 2 && signType == 2 && wvl < speedl".into(), "straight", up.clone()),
        ("pmode != 1 && pmode <= 2 && signType == 2 && wvl >= speedl".into(), "straight", String::new()),
        ("pmode == 1 && signType == 2".into(), "straight", String::new()),
        (
            "pmode <= 2 && signType == 3".into(),
            "turn_right",
            "sync go_right!; update mode := 4, entry_speed := wvl, right_clk := 0;".into(),
        ),
        (
            "pmode <= 2 && signType == 4".into(),
            "turn_left",
            "sync go_left!; update mode := 3, entry_speed := wvl, left_clk := 0;".into(),
        ),
        ("pmode <= 2 && signType == 5".into(), "stop", "sync go_stop!; update mode := 5;".into()),
        ("pmode == 3 && signType != 5".into(), "turn_left", String::new()),
        ("pmode == 4 && signType != 5".into(), "turn_right", String::new()),
        ("pmode == 5".into(), "stop", String::new()),
        ("pmode == 6 && signType <= 2".into(), "straight", up.clone()),
        ("pmode == 6 && signType >= 3".into(), "stop", String::new()),
    ];
    for (g, to, rest) in &rows {
        t.edge("ctrl", to, format!("guard {g}; {rest}").trim_end());
    }
    for (m, turn) in [(3, "turn_left"), (4, "turn_right")] {
        if cfg.refined {
            // finish the turn, then stop
            t.edge(
                "ctrl",
                turn,
                &format!("guard pmode == {m} && signType == 5; update stop_pending := true;"),
            );
        } else {
            t.edge(
                "ctrl",
                "stop",
                &format!("guard pmode == {m} && signType == 5; sync go_stop!; update mode := 5;"),
            );
        }
    }
    for turn in ["turn_left", "turn_right"] {
        if cfg.refined {
            t.edge(turn, "straight", "guard !stop_pending; sync turn_done?; update mode := 0;");
            t.edge(
                turn,
                "after_turn",
                "guard stop_pending; sync turn_done?; update stop_pending := false, mode := 0;",
            );
        } else {
            t.edge(turn, "straight", "sync turn_done?; update mode := 0;");
        }
    }
    if cfg.refined {
        t.edge("after_turn", "stop", "sync go_stop!; update mode := 5;");
    }
    t.done(s);
}

fn straight(s: &mut String) {
    let mut t = Tpl::new("Straight", "clock t;");
    t.loc("init loc constspeed {}");
    t.loc("loc ini {}");
    t.loc("committed loc up_cmd {}");
    t.loc("committed loc down_cmd {}");
    t.loc("committed loc const_cmd {}");
    t.loc("loc speed_up { inv wvl <= target; }");
    t.loc("loc speed_down { inv wvl >= target; }");
    for from in ["constspeed", "ini", "speed_up", "speed_down"] {
        t.edge(from, "up_cmd", "sync go_up?; update t := 0;");
        t.edge(from, "down_cmd", "sync go_down?; update t := 0;");
    }
    t.edge("speed_up", "const_cmd", "sync go_const?;");
    t.edge("up_cmd", "speed_up", "sync accel!;");
    t.edge("down_cmd", "speed_down", "sync decel!;");
    t.edge("const_cmd", "constspeed", "sync hold!;");
    t.edge("speed_up", "constspeed", "guard wvl >= target; sync reached!; update mode := 0;");
    t.edge("speed_down", "constspeed", "guard wvl <= target; sync reached!; update mode := 0;");
    for from in ["constspeed", "speed_up", "speed_down"] {
        for ch in ["go_left", "go_right", "go_stop"] {
            t.edge(from, "ini", &format!("sync {ch}?;"));
        }
    }
    t.edge("ini", "constspeed", "sync turn_done?;");
    t.done(s);
}

/// Left turn: above the threshold the left wheels slow down first, below it
/// the right wheels speed up first; the other side catches up at the end.
fn turn(cfg: &AvConfig, s: &mut String, left: bool) {
    let r = fmt_real;
    let (name, go, inner, outer) = if left {
        ("TurnLeft", "go_left", ("l", "L"), ("r", "R"))
    } else {
        ("TurnRight", "go_right", ("r", "R"), ("l", "L"))
    };
    let ph = r(cfg.turn_phase);
    let th = r(cfg.turn_threshold);
    let mut t = Tpl::new(name, "clock x;");
    let dec_in = format!("decelerate{}", inner.0);
    let acc_out = format!("accelerate{}", outer.0);
    let dec_out = format!("decelerate{}", outer.0);
    let acc_in = format!("accelerate{}", inner.0);
    t.loc("init loc ini {}");
    t.loc("committed loc start {}");
    for l in [&dec_in, &acc_out] {
        t.loc(&format!("loc {l} {{ inv x <= {ph}; }}"));
    }
    t.loc(&format!("loc turning {{ inv x <= {}; }}", r(cfg.turn_hold_upper)));
    for l in [&dec_out, &acc_in] {
        t.loc(&format!("loc {l} {{ inv x <= {ph}; }}"));
    }
    t.loc("committed loc finish {}");
    t.edge("ini", "start", &format!("sync {go}?; update x := 0;"));
    t.edge(
        "start",
        &dec_in,
        &format!("guard entry_speed >= {th}; sync dec{}!; update x := 0;", inner.1),
    );
    t.edge(
        "start",
        &acc_out,
        &format!("guard entry_speed < {th}; sync inc{}!; update x := 0;", outer.1),
    );
    t.edge(
        &dec_in,
        "turning",
        &format!("guard x >= {ph}; sync hold{}!; update x := 0;", inner.1),
    );
    t.edge(
        &acc_out,
        "turning",
        &format!("guard x >= {ph}; sync hold{}!; update x := 0;", outer.1),
    );
    let hl = r(cfg.turn_hold_lower);
    t.edge(
        "turning",
        &dec_out,
        &format!("guard x >= {hl} && entry_speed >= {th}; sync dec{}!; update x := 0;", outer.1),
    );
    t.edge(
        "turning",
        &acc_in,
        &format!("guard x >= {hl} && entry_speed < {th}; sync inc{}!; update x := 0;", inner.1),
    );
    t.edge(&dec_out, "finish", &format!("guard x >= {ph}; sync hold!;"));
    t.edge(&acc_in, "finish", &format!("guard x >= {ph}; sync hold!;"));
    t.edge("finish", "ini", "sync turn_done!;");
    for l in [&dec_in, &acc_out, &"turning".to_string(), &dec_out, &acc_in] {
        t.edge(l, "ini", "sync go_stop?;");
    }
    t.done(s);
}

fn stop(cfg: &AvConfig, s: &mut String) {
    let mut t = Tpl::new("Stop", "");
    t.loc("init loc ini {}");
    t.loc("committed loc brake_cmd {}");
    t.loc(&format!("loc braking {{ exitrate {}; }}", fmt_real(cfg.brake_exit_rate)));
    t.loc("committed loc stop_cmd {}");
    t.loc("loc totally_stop {}");
    t.edge("ini", "brake_cmd", "sync go_stop?;");
    t.edge("brake_cmd", "braking", "sync decel!;");
    if cfg.refined {
        t.edge("braking", "stop_cmd", "guard wvl <= 0 && wvr <= 0;");
    } else {
        t.edge("braking", "stop_cmd", "guard wvl <= 0;");
        t.edge("braking", "stop_cmd", "guard wvr <= 0;");
    }
    t.edge("stop_cmd", "totally_stop", "sync stopped!; update mode := 6;");
    t.edge("totally_stop", "ini", "sync go_up?;");
    t.done(s);
}

fn speed(cfg: &AvConfig, s: &mut String, side: &str, clock: &str) {
    let a = fmt_real(cfg.acceleration);
    let mut t = Tpl::new(&format!("Speed{side}"), "");
    t.loc(&format!("init loc hold {{ rate {clock} = 0; }}"));
    t.loc(&format!("loc inc {{ rate {clock} = {a}; }}"));
    t.loc(&format!("loc dec {{ inv {clock} >= 0; rate {clock} = -{a}; }}"));
    let to_inc = ["accel".to_string(), format!("inc{side}")];
    let to_dec = ["decel".to_string(), format!("dec{side}")];
    let to_hold = [
        "hold".to_string(),
        format!("hold{side}"),
        "reached".into(),
        "go_left".into(),
        "go_right".into(),
    ];
    for (target, chans) in [("inc", &to_inc[..]), ("dec", &to_dec[..]), ("hold", &to_hold[..])] {
        for from in ["hold", "inc", "dec"] {
            if from == target {
                continue;
            }
            for ch in chans {
                t.edge(from, target, &format!("sync {ch}?;"));
            }
        }
    }
    t.edge("dec", "hold", &format!("guard {clock} <= 0; update {clock} := 0;"));
    t.done(s);
}

const ENERGY_CLOCKS: [&str; 6] = ["Con_en", "constSpeed_en", "Up_en", "Down_en", "Turning_en", "braking_en"];

fn energy(cfg: &AvConfig, s: &mut String) {
    let r = fmt_real;
    let locals: Vec<String> = ENERGY_CLOCKS.iter().map(|c| format!("clock {c};")).collect();
    let mut t = Tpl::new("energy", &locals.join(" "));
    let rate = |coef: f64| format!("{} * average_speed", r(coef * cfg.tu_seconds));
    let modes: [(&str, Option<(&str, f64)>); 6] = [
        ("const_mode", Some(("constSpeed_en", cfg.const_speed_rate))),
        ("up_mode", Some(("Up_en", cfg.up_down_rate))),
        ("down_mode", Some(("Down_en", cfg.up_down_rate))),
        ("turn_mode", Some(("Turning_en", cfg.turning_rate))),
        ("brake_mode", Some(("braking_en", cfg.braking_rate))),
        ("stopped_mode", None),
    ];
    for (i, (loc, active)) in modes.iter().enumerate() {
        let mut body = String::new();
        for c in ENERGY_CLOCKS {
            let e = match active {
                Some((a, coef)) if c == *a || c == "Con_en" => rate(*coef),
                _ => "0".into(),
            };
            write!(body, " rate {c} = {e};").unwrap();
        }
        t.loc(&format!("{}loc {loc} {{{body} }}", if i == 0 { "init " } else { "" }));
    }
    let moves: [(&[&str], &str, &str, &str); 8] = [
        (&["const_mode", "down_mode", "stopped_mode"], "up_mode", "go_up", "Up_en"),
        (&["const_mode", "up_mode"], "down_mode", "go_down", "Down_en"),
        (&["up_mode"], "const_mode", "go_const", "constSpeed_en"),
        (&["up_mode", "down_mode"], "const_mode", "reached", "constSpeed_en"),
        (&["turn_mode"], "const_mode", "turn_done", "constSpeed_en"),
        (&["const_mode", "up_mode", "down_mode"], "turn_mode", "go_left", "Turning_en"),
        (&["const_mode", "up_mode", "down_mode"], "turn_mode", "go_right", "Turning_en"),
        (&["const_mode", "up_mode", "down_mode", "turn_mode"], "brake_mode", "go_stop", "braking_en"),
    ];
    for (froms, to, ch, reset) in moves {
        for from in froms {
            t.edge(from, to, &format!("sync {ch}?; update {reset} := 0;"));
        }
    }
    t.edge("brake_mode", "stopped_mode", "sync stopped?;");
    t.done(s);
}

/// The sign source driven by a clock that requests a sign every time unit.
pub fn sign_source_harness(cfg: &AvConfig) -> String {
    let mut s = format!(
        "broadcast chan gen;\nint signType = 0;\nint speedh = {};\nint speedl = {};\n\n",
        cfg.max_limits[1], cfg.min_limits[0]
    );
    sign_source(cfg, &mut s);
    s.push_str(
        "template Driver() {\n  clock x;\n  init loc s { inv x <= 1; }\n  \
         s -> s { guard x >= 1; sync gen!; update x := 0; }\n}\n\nsystem SignSource, Driver;\n",
    );
    s
}

pub fn build_av_model(cfg: &AvConfig) -> Result<Model, ParseError> {
    parse_model(&av_source(cfg))
}

/// Query file text for the requirement suite.
pub fn requirements_source(cfg: &AvConfig) -> String {
    let r = fmt_real;
    let th = r(cfg.turn_threshold);
    let mut s = String::from("// requirement suite; bound 3000 tu = 60 s\n\n// timing constraints\n");
    let timing = [
        format!(
            "constraint SignRegExec execution(lower={}, upper={}, m=19, k=20) on start=sig_start, stop=sig_done;",
            r(cfg.recognition_lower),
            r(cfg.recognition_upper)
        ),
        format!(
            "constraint CameraExec execution(lower=0, upper={}) on start=cam_start, stop=cam_done;",
            r(cfg.camera_exec_upper)
        ),
        format!(
            "constraint Sync synchronization(tolerance={}) on e1=sig_done, e2=fl_spd, e3=fr_spd, e4=rl_spd, e5=rr_spd;",
            r(cfg.sync_tolerance)
        ),
        format!(
            "constraint CamPeriod periodic(period={}, jitter={}) on occurrence=cam_start;",
            r(cfg.camera_period),
            r(cfg.camera_jitter)
        ),
        format!(
            "constraint CamE2E end_to_end(lower={}, upper={}) on source=cam_start, target=sig_done;",
            r(cfg.end_to_end_lower),
            r(cfg.end_to_end_upper)
        ),
        format!(
            "constraint CamToReg end_to_end(lower=0, upper={}) on source=cam_start, target=sig_done;",
            r(cfg.end_to_end_upper)
        ),
        "constraint BrakeExec execution(lower=0, upper=60) on start=go_stop, stop=stopped;".to_string(),
    ];
    for c in &timing {
        writeln!(s, "{c}").unwrap();
    }
    s.push('\n');

    let pr = |body: &str| format!("Pr[<=3000]([] {body}) >= 0.95");
    let decided = |pm: u8, sign: u8| format!("pmode == {pm} && signType == {sign} && !Ctrl.ctrl && Ctrl.since == 0");
    let mut q: Vec<(String, String, &str)> = Vec::new();
    // R1-R9: the controller honours turn and stop signs from every straight mode
    for (i, (sign, loc)) in [(4, "turn_left"), (3, "turn_right"), (5, "stop")].iter().enumerate() {
        for pm in 0..3u8 {
            let n = i * 3 + pm as usize + 1;
            q.push((
                format!("R{n}"),
                pr(&format!("({}) imply Ctrl.{loc}", decided(pm, *sign))),
                "valid",
            ));
        }
    }
    let straight_rows: [(u8, u8, u8, &str, &str); 8] = [
        (10, 0, 2, "wvl < speedl", "mode == 1"),
        (11, 0, 1, "wvl > speedh", "mode == 2"),
        (12, 2, 2, "wvl < speedl", "mode == 1"),
        (13, 0, 2, "wvl >= speedl", "mode == 0"),
        (14, 1, 1, "wvl > speedh", "mode == 2"),
        (15, 0, 1, "wvl <= speedh", "mode == 0"),
        (18, 1, 0, "true", "mode == 1"),
        (19, 2, 0, "true", "mode == 2"),
    ];
    for (n, pm, sign, cond, then) in straight_rows {
        let expect = if [13, 15, 18, 19].contains(&n) { "" } else { "valid" };
        q.push((
            format!("R{n}"),
            pr(&format!("({} && {cond}) imply {then}", decided(pm, sign))),
            expect,
        ));
    }
    q.push((
        "R16".into(),
        pr("!(Stop.totally_stop && wvl == 0 && wvr > 0)"),
        "valid",
    ));
    q.push((
        "R17".into(),
        pr("!(Stop.totally_stop && wvr == 0 && wvl > 0)"),
        "valid",
    ));
    let turn_rows = [
        (20, "TurnLeft", format!("entry_speed >= {th}"), "wvl < wvr && wvr == entry_speed"),
        (21, "TurnLeft", format!("entry_speed < {th}"), "wvr > wvl && wvl == entry_speed"),
        (22, "TurnRight", format!("entry_speed >= {th}"), "wvr < wvl && wvl == entry_speed"),
        (23, "TurnRight", format!("entry_speed < {th}"), "wvl > wvr && wvr == entry_speed"),
    ];
    for (n, tpl, cond, then) in turn_rows {
        q.push((format!("R{n}"), pr(&format!("({tpl}.turning && {cond}) imply ({then})")), "valid"));
    }
    q.push(("R24".into(), pr("Stop.braking imply wvl == wvr"), "valid"));
    q.push(("R25".into(), pr("Stop.totally_stop imply (wvl == 0 && wvr == 0)"), "valid"));
    let cmp = |var: &str, lim: i64, lo: String, hi: String| {
        format!("Pr[<=3000]([] {var} == {lim} imply {lo}) >= Pr[<=3000]([] {var} == {lim} imply {hi})")
    };
    let m = cfg.speed_margin;
    for (n, lim) in [(26, cfg.max_limits[0]), (27, cfg.max_limits[1])] {
        let edge = r(lim as f64 - m);
        q.push((
            format!("R{n}"),
            cmp("speedh", lim, format!("wvl <= {edge}"), format!("(wvl > {edge} && wvl <= {lim})")),
            "valid",
        ));
    }
    for (n, lim) in [(28, cfg.min_limits[0]), (29, cfg.min_limits[1])] {
        let edge = r(lim as f64 + m);
        q.push((
            format!("R{n}"),
            cmp("speedl", lim, format!("wvl >= {edge}"), format!("(wvl > {lim} && wvl <= {edge})")),
            if n == 28 { "" } else { "valid" },
        ));
    }
    q.push(("R30".into(), pr("Ctrl.turn_left imply wvl <= wvr"), "valid"));
    q.push(("R31".into(), pr("Ctrl.turn_right imply wvr <= wvl"), "valid"));
    q.push(("R32".into(), pr("Straight.speed_up imply Straight.t <= 120"), ""));
    q.push(("R33".into(), pr("Straight.speed_down imply Straight.t <= 120"), "valid"));
    q.push(("R34".into(), pr("!BrakeExec.fail"), "valid"));
    q.push(("R35".into(), pr("Ctrl.turn_left imply Ctrl.left_clk <= 75"), "valid"));
    q.push(("R36".into(), pr("Ctrl.turn_right imply Ctrl.right_clk <= 75"), "valid"));
    q.push(("R37".into(), pr("Camera.camera_en <= 3"), "valid"));
    q.push(("R38".into(), pr("SignRec.signreg_en <= 5"), "valid"));
    q.push((
        "R39".into(),
        "simulate 1 [<=3000] {signType, average_speed, energy.constSpeed_en}".into(),
        "",
    ));
    q.push(("R40".into(), pr("Ctrl.turn_left imply energy.Turning_en <= 270"), "valid"));
    q.push(("R41".into(), pr("Ctrl.turn_right imply energy.Turning_en <= 270"), "valid"));
    q.push(("R42".into(), "E[<=3000; 100](max: energy.braking_en)".into(), "[300, 600]"));
    q.push(("R43".into(), pr("energy.Up_en <= 400"), "valid"));
    q.push(("R44".into(), pr("energy.Down_en <= 400"), "valid"));
    q.push(("R45".into(), "simulate 1 [<=3000] {average_speed, energy.Con_en}".into(), ""));
    for (n, c) in [(46, "SignRegExec"), (47, "CameraExec"), (48, "Sync"), (49, "CamPeriod"), (50, "CamE2E")] {
        q.push((format!("R{n}"), pr(&format!("!{c}.fail")), "valid"));
    }
    q.push((
        "R51".into(),
        "Pr[<=3000]([] CamToReg.dclk <= 25)".into(),
        "[0.9, 1]",
    ));
    q.sort_by_key(|(n, _, _)| n[1..].parse::<u32>().unwrap());
    s.push_str("// requirements\n");
    for (name, query, expect) in q {
        if expect.is_empty() {
            writeln!(s, "{name}: {query};").unwrap();
        } else {
            writeln!(s, "{name}: {query} => {expect};").unwrap();
        }
    }
    s
}

/// The R16 pair: the hypothesis that a stop ends with unequal wheel speeds
/// at most 1% of the time, and an estimate that records a witness run.
pub fn r16_source() -> String {
    let p = "Stop.totally_stop && wvl == 0 && wvr > 0";
    format!("R16: Pr[<=3000](<> {p}) <= 0.01 => valid;\nR16_witness: Pr[<=3000](<> {p});\n")
}

pub fn requirement_file(cfg: &AvConfig) -> QueryFile {
    parse_query_file(&requirements_source(cfg)).expect("generated requirement suite parses")
}

pub fn requirement_queries(cfg: &AvConfig) -> Vec<NamedQuery> {
    requirement_file(cfg).queries
}
