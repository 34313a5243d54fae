//! Simulator integration tests: minimal scenarios, behavior preservation,
//! determinism, the handler truth-table oracle, and threat injections.

mod common;

use common::load_app;
use iotdots_core::instrument::{instrument, Category};
use iotdots_core::logstore::{LocationMode, LogValue};
use iotdots_core::scenario::{
    exercise_scenario, inject_threat, office_baseline, Actor, RoutineSpec, Scenario, ThreatClass,
    TimelineAction, TimelineEvent, HOUR_MS, MIN_MS,
};
use iotdots_core::sim::{prepare_apps, run, Effect, EventCtx, RunConfig, RuntimeContext, SimError};
use iotdots_core::source::SourceUnit;
use std::collections::BTreeMap;

fn plain_cfg() -> RunConfig {
    RunConfig { allow_plain: true, ..RunConfig::default() }
}

fn instrumented_source(name: &str) -> String {
    let src = load_app(name);
    instrument(&src).expect("instruments").0.text
}

fn minimal_motion_light(instrument_app: bool) -> Scenario {
    let source = if instrument_app {
        instrumented_source("lobby-light.groovy")
    } else {
        load_app("lobby-light.groovy").text
    };
    let mut scenario = exercise_scenario("lobby-light", &source, 1, 0).expect("builds");
    scenario.timeline = vec![TimelineEvent {
        ts: 60_000,
        actor: Actor::Env,
        action: TimelineAction::SensorChange {
            device: "dev-motionSensor".into(),
            attribute: "motion".into(),
            value: LogValue::Text("active".into()),
        },
    }];
    scenario.duration_ms = 600_000;
    scenario
}

#[test]
fn one_motion_event_turns_the_light_on() {
    let scenario = minimal_motion_light(true);
    let apps = prepare_apps(&scenario).expect("prepares");
    let out = run(&scenario, &apps, &RunConfig::default()).expect("runs");

    let commands: Vec<&Effect> =
        out.effects.iter().filter(|e| matches!(e, Effect::Command { .. })).collect();
    assert_eq!(commands.len(), 1);
    let Effect::Command { device, command, by, .. } = commands[0] else { unreachable!() };
    assert_eq!(device, "dev-light");
    assert_eq!(command, "on");
    assert_eq!(by, "lobby-light");

    let events = out.logs.iter().filter(|r| r.kind == Category::Event).count();
    let actions = out.logs.iter().filter(|r| r.kind == Category::Action).count();
    assert!(events >= 1, "at least one event record");
    assert_eq!(actions, 1, "exactly one action record");
    let action = out.logs.iter().find(|r| r.kind == Category::Action).unwrap();
    assert_eq!(action.device_id.as_deref(), Some("dev-light"));
    assert_eq!(action.attribute.as_deref(), Some("on"));
}

#[test]
fn instrumented_and_plain_effects_are_identical() {
    let plain = minimal_motion_light(false);
    let instrumented = minimal_motion_light(true);
    let plain_apps = prepare_apps(&plain).expect("prepares");
    let inst_apps = prepare_apps(&instrumented).expect("prepares");
    let out_plain = run(&plain, &plain_apps, &plain_cfg()).expect("runs");
    let out_inst = run(&instrumented, &inst_apps, &RunConfig::default()).expect("runs");
    assert_eq!(out_plain.effects, out_inst.effects);
    assert!(out_plain.logs.is_empty(), "plain app logs nothing");
    assert!(!out_inst.logs.is_empty());
}

#[test]
fn plain_apps_require_allow_plain() {
    let scenario = minimal_motion_light(false);
    let apps = prepare_apps(&scenario).expect("prepares");
    match run(&scenario, &apps, &RunConfig::default()) {
        Err(SimError::NotInstrumented {

 app_id }) => assert_eq!(app_id, "lobby-light"),
        other => panic!("expected NotInstrumented, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn repeat_runs_are_bit_identical() {
    let suite_scenario = || {
        let mut s = office_baseline(42, 2, 4, RoutineSpec::default());
        for app in &mut s.apps {
            app.source = instrument(&SourceUnit::new(app.source.clone(), app.app_id.clone()))
                .expect("instruments")
                .0
                .text;
        }
        s
    };
    let s1 = suite_scenario();
    let s2 = suite_scenario();
    let out1 = run(&s1, &prepare_apps(&s1).unwrap(), &RunConfig::default()).expect("runs");
    let out2 = run(&s2, &prepare_apps(&s2).unwrap(), &RunConfig::default()).expect("runs");
    assert_eq!(out1, out2);
    assert!(out1.logs.len() > 100, "baseline produces a real log volume");
}

#[test]
fn per_app_clocks_and_sequences_are_monotone() {
    let mut s = office_baseline(7, 2, 4, RoutineSpec::default());
    for app in &mut s.apps {
        app.source = instrument(&SourceUnit::new(app.source.clone(), app.app_id.clone()))
            .expect("instruments")
            .0
            .text;
    }
    let out = run(&s, &prepare_apps(&s).unwrap(), &RunConfig::default()).expect("runs");
    let mut last: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in &out.logs {
        if let Some((ts, seq)) = last.get(r.app_id.as_str()) {
            assert!(r.ts >= *ts, "per-app timestamps regress");
            assert!(r.seq > *seq, "per-app sequence not strictly increasing");
        }
        last.insert(&r.app_id, (r.ts, r.seq));
    }
}

#[test]
fn every_command_effect_has_a_known_origin() {
    let mut s = office_baseline(3, 2, 4, RoutineSpec::default());
    for app in &mut s.apps {
        app.source = instrument(&SourceUnit::new(app.source.clone(), app.app_id.clone()))
            .expect("instruments")
            .0
            .text;
    }
    let app_ids: Vec<String> = s.apps.iter().map(|a| a.app_id.clone()).collect();
    let user_ids: Vec<String> = s.users.iter().map(|u| format!("user:{}", u.user_id)).collect();
    let out = run(&s, &prepare_apps(&s).unwrap(), &RunConfig::default()).expect("runs");
    for e in &out.effects {
        if let Effect::Command { by, .. } = e {
            let known = app_ids.iter().any(|a| a == by)
                || user_ids.iter().any(|u| u == by)
                || by.starts_with("app:")
                || by == "env";
            assert!(known, "unattributed command origin {by:?}");
        }
    }
}

#[test]
fn run_in_fires_after_the_configured_delay() {
    let scenario = {
        let mut s = minimal_motion_light(true);
        s.timeline = vec![
            TimelineEvent {
                ts: 60_000,
                actor: Actor::Env,
                action: TimelineAction::SensorChange {
                    device: "dev-motionSensor".into(),
                    attribute: "motion".into(),
                    value: LogValue::Text("active".into()),
                },
            },
            TimelineEvent {
                ts: 120_000,
                actor: Actor::Env,
                action: TimelineAction::SensorChange {
                    device: "dev-motionSensor".into(),
                    attribute: "motion".into(),
                    value: LogValue::Text("inactive".into()),
                },
            },
        ];
        s.duration_ms = 600_000;
        s
    };
    let out = run(&scenario, &prepare_apps(&scenario).unwrap(), &RunConfig::default()).expect("runs");
    let off = out
        .effects
        .iter()
        .find_map(|e| match e {
            Effect::Command { ts, command, .. } if command == "off" => Some(*ts),
            _ => None,
        })
        .expect("light turns off");
    // offDelay default is 120 seconds after the inactive event.
    assert_eq!(off, 120_000 + 120_000);
}

#[test]
fn rescheduling_replaces_the_pending_callback() {
    let scenario = {
        let mut s = minimal_motion_light(true);
        let inactive = |ts: u64| TimelineEvent {
            ts,
            actor: Actor::Env,
            action: TimelineAction::SensorChange {
                device: "dev-motionSensor".into(),
                attribute: "motion".into(),
                value: LogValue::Text("inactive".into()),
            },
        };
        let active = |ts: u64| TimelineEvent {
            ts,
            actor: Actor::Env,
            action: TimelineAction::SensorChange {
                device: "dev-motionSensor".into(),
                attribute: "motion".into(),
                value: LogValue::Text("active".into()),
            },
        };
        s.timeline = vec![active(60_000), inactive(90_000), active(120_000), inactive(150_000)];
        s.duration_ms = 600_000;
        s
    };
    let out = run(&scenario, &prepare_apps(&scenario).unwrap(), &RunConfig::default()).expect("runs");
    let offs: Vec<u64> = out
        .effects
        .iter()
        .filter_map(|e| match e {
            Effect::Command { ts, command, .. } if command == "off" => Some(*ts),
            _ => None,
        })
        .collect();
    // The 90s schedule was replaced by the 150s one: a single off at 270s.
    assert_eq!(offs, vec![270_000]);
}

#[test]
fn unknown_command_is_an_interpreter_error() {
    let source = "// instrumented-by: iotdots\npreferences {\n    section(\"d\") {\n        input \"light\", \"capability.switch\"\n    }\n}\ndef installed() {\n    initialize()\n}\ndef initialize() {\n    subscribe(light, \"switch\", handler)\n}\ndef handler(evt) {\n    light.explode()\n}\n";
    let mut scenario = exercise_scenario("boom", source, 1, 0).expect("builds");
    scenario.timeline = vec![TimelineEvent {
        ts: 1000,
        actor: Actor::Env,
        action: TimelineAction::SensorChange {
            device: "dev-light".into(),
            attribute: "switch".into(),
            value: LogValue::Text("on".into()),
        },
    }];
    let apps = prepare_apps(&scenario).expect("prepares");
    match run(&scenario, &apps, &RunConfig::default()) {
        Err(SimError::Interpreter { app_id, message, span }) => {
            assert_eq!(app_id, "boom");
            assert!(message.contains("explode"));
            assert!(span.is_some());
        }
        other => panic!("expected interpreter error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn nested_branches_match_a_truth_table_oracle() {
    // Three comparisons select one of eight messages.
    let source = "preferences {\n    section(\"t\") {\n        input \"a\", \"number\", defaultValue: 0\n        input \"b\", \"number\", defaultValue: 0\n        input \"c\", \"number\", defaultValue: 0\n    }\n}\ndef installed() {\n    initialize()\n}\ndef initialize() {\n    subscribe(location, \"mode\", handler)\n}\ndef handler(evt) {\n    if (a > 5) {\n        if (b > 5) {\n            if (c > 5) {\n                sendPush(\"m111\")\n            } else {\n                sendPush(\"m110\")\n            }\n        } else {\n            if (c > 5) {\n                sendPush(\"m101\")\n            } else {\n                sendPush(\"m100\")\n            }\n        }\n    } else {\n        if (b > 5) {\n            if (c > 5) {\n                sendPush(\"m011\")\n            } else {\n                sendPush(\"m010\")\n            }\n        } else {\n            if (c > 5) {\n                sendPush(\"m001\")\n            } else {\n                sendPush(\"m000\")\n            }\n        }\n    }\n}\n";
    for combo in 0..8u8 {
        let a = if combo & 0b100 != 0 { 9.0 } else { 1.0 };
        let b = if combo & 0b010 != 0 { 9.0 } else { 1.0 };
        let c = if combo & 0b001 != 0 { 9.0 } else { 1.0 };
        let mut scenario = exercise_scenario("truth", source, 1, 0).expect("builds");
        scenario.apps[0].bindings.insert("a".into(), LogValue::Number(a));
        scenario.apps[0].bindings.insert("b".into(), LogValue::Number(b));
        scenario.apps[0].bindings.insert("c".into(), LogValue::Number(c));
        scenario.timeline = vec![TimelineEvent {
            ts: 1000,
            actor: Actor::Env,
            action: TimelineAction::ModeChange { mode: LocationMode::Office },
        }];
        let apps = prepare_apps(&scenario).expect("prepares");
        let out = run(&scenario, &apps, &plain_cfg()).expect("runs");
        // Independent oracle: the branch taken encodes the three bits.
        let expected = format!(
            "m{}{}{}",
            (a > 5.0) as u8,
            (b > 5.0) as u8,
            (c > 5.0) as u8
        );
        let messages: Vec<&str> = out
            .effects
            .iter()
            .filter_map(|e| match e {
                Effect::Message { args, .. } => args.first().map(|s| s.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(messages, vec![expected.as_str()], "combo {combo:03b}");
    }
}

#[test]
fn interpolated_payload_carries_the_bound_value() {
    let source = instrumented_source("thermostat-comfort.groovy");
    let mut scenario = exercise_scenario("thermostat-comfort", &source, 1, 0).expect("builds");
    scenario.apps[0].bindings.insert("phone".into(), LogValue::Text("5551234".into()));
    scenario.timeline = vec![TimelineEvent {
        ts: 1000,
        actor: Actor::Env,
        action: TimelineAction::SensorChange {
            device: "dev-tempSensor".into(),
            attribute: "temperature".into(),
            value: LogValue::Number(90.0),
        },
    }];
    let apps = prepare_apps(&scenario).expect("prepares");
    let out = run(&scenario, &apps, &RunConfig::default()).expect("runs");
    // The SMS sink record captures the recipient drawn from the binding.
    let sink = out
        .logs
        .iter()
        .find(|r| r.kind == Category::SinkMessage)
        .expect("sink record present");
    assert_eq!(sink.value.as_text(), "5551234");
    // The SMS effect itself interpolates the reading.
    let sms = out
        .effects
        .iter()
        .find_map(|e| match e {
            Effect::Message { kind, args, .. } if kind == "sms" => Some(args.clone()),
            _ => None,
        })
        .expect("sms sent");
    assert!(sms[1].contains("90"), "alert message mentions the reading: {sms:?}");
}

#[test]
fn eval_handler_runs_against_a_context() {
    let scenario = minimal_motion_light(true);
    let apps = prepare_apps(&scenario).expect("prepares");
    let mut ctx = RuntimeContext::new(&scenario, &RunConfig::default());
    let event = EventCtx {
        device: Some("dev-motionSensor".into()),
        name: "motion".into(),
        value: LogValue::Text("active".into()),
    };
    iotdots_core::sim::eval_handler(&scenario, &apps, &mut ctx, 0, "motionHandler", &event)
        .expect("handler runs");
    assert!(ctx
        .effects
        .iter()
        .any(|e| matches!(e, Effect::Command { command, .. } if command == "on")));
}

#[test]
fn behavior3_inverts_one_apps_reports_inside_the_window() {
    let mut s = office_baseline(11, 3, 4, RoutineSpec::default());
    for app in &mut s.apps {
        app.source = instrument(&SourceUnit::new(app.source.clone(), app.app_id.clone()))
            .expect("instruments")
            .0
            .text;
    }
    let s = inject_threat(&s, ThreatClass::Behavior3, &BTreeMap::new()).expect("injects");
    let out = run(&s, &prepare_apps(&s).unwrap(), &RunConfig::default()).expect("runs");
    let window = s.inverted[0].clone();
    // Inside the window the logger and the zone app disagree on some event.
    let mut by_ts: BTreeMap<u64, BTreeMap<String, String>> = BTreeMap::new();
    for r in &out.logs {
        if r.kind == Category::Event
            && r.device_id.as_deref() == Some(window.device.as_str())
            && r.ts >= window.from
            && r.ts < window.to
        {
            by_ts.entry(r.ts).or_default().insert(r.app_id.clone(), r.value.as_text());
        }
    }
    let contradictions = by_ts
        .values()
        .filter(|apps| {
            let values: std::collections::BTreeSet<&String> = apps.values().collect();
            apps.len() > 1 && values.len() > 1
        })
        .count();
    assert!(contradictions > 0, "inverted reports must contradict the honest observer");
    assert_eq!(out.truth.iter().filter(|t| t.class == ThreatClass::Behavior3).count(), 1);
}

#[test]
fn activity5_unlocks_after_hours_with_an_authorized_controller() {
    let mut s = office_baseline(13, 3, 4, RoutineSpec::default());
    for app in &mut s.apps {
        app.source = instrument(&SourceUnit::new(app.source.clone(), app.app_id.clone()))
            .expect("instruments")
            .0
            .text;
    }
    let s = inject_threat(&s, ThreatClass::Activity5, &BTreeMap::new()).expect("injects");
    let out = run(&s, &prepare_apps(&s).unwrap(), &RunConfig::default()).expect("runs");
    let unlock_ts = scenario_day_ts(1, 20, 45);
    let unlock = out
        .logs
        .iter()
        .find(|r| {
            r.attribute.as_deref() == Some("lock")
                && r.value.as_text() == "unlocked"
                && r.ts == unlock_ts
        })
        .expect("unlock event logged");
    assert_eq!(unlock.controller_id.as_deref(), Some("ctrl-03"));
    assert!(out
        .truth
        .iter()
        .any(|t| t.class == ThreatClass::Activity5 && unlock_ts >= t.start && unlock_ts < t.end));
}

fn scenario_day_ts(day: u64, hour: u64, minute: u64) -> u64 {
    day * 24 * HOUR_MS + hour * HOUR_MS + minute * MIN_MS
}

#[test]
fn behavior_preservation_across_fixture_corpus() {
    // Every fixture app, several seeded random traces each; the full
    // twenty-trace sweep runs in the acceptance suite.
    let manifest = common::load_manifest();
    for name in manifest.apps.keys() {
        let plain_src = load_app(name);
        let app_id = name.trim_end_matches(".groovy");
        let (instrumented, _) = instrument(&plain_src).expect("instruments");
        for seed in [1u64, 2, 3] {
            let plain = exercise_scenario(app_id, &plain_src.text, seed, 40).expect("builds");
            let with_logs = exercise_scenario(app_id, &instrumented.text, seed, 40).expect("builds");
            let out_plain =
                run(&plain, &prepare_apps(&plain).unwrap(), &plain_cfg()).expect("plain runs");
            let out_inst = run(&with_logs, &prepare_apps(&with_logs).unwrap(), &RunConfig::default())
                .expect("instrumented runs");
            assert_eq!(out_plain.effects, out_inst.effects, "{name} seed {seed} diverged");
        }
    }
}
