use hybridsim_core::{Scheduler, SimTime};
use proptest::prelude::*;

proptest! {
    #[test]
    fn fires_in_time_then_insertion_order(
        times in proptest::collection::vec(0u64..50, 1..200),
        cancel in proptest::collection::vec(any::<bool>(), 200),
    ) {
        let mut s: Scheduler<usize> = Scheduler::new();
        let handles: Vec<_> = times.iter().enumerate().map(|(i, &t)| s.schedule_at(SimTime::from_millis(t), i)).collect();
        let mut live: Vec<(u64, usize)> = Vec::new();
        for (i, h) in handles.iter().enumerate() {
            if cancel[i] {
                prop_assert!(s.cancel(*h));
                prop_assert!(!s.cancel(*h));
            } else {
                live.push((times[i], i));
            }
        }
        live.sort();
        let mut fired = Vec::new();
        while let Some((t, i)) = s.pop_until(SimTime::MAX) {
            prop_assert_eq!(t, SimTime::from_millis(times[i]));
            fired.push((times[i], i));
        }
        prop_assert_eq!(fired, live);
    }

    #[test]
    fn handler_scheduled_events_never_go_back_in_time(
        seeds in proptest::collection::vec((0u64..1000, 0u64..100), 1..50),
    ) {
        let mut s: Scheduler<u64> = Scheduler::new();
        for &(t, d) in &seeds {
            s.schedule_at(SimTime::from_micros(t), d);
        }
        let mut last = SimTime::ZERO;
        let mut budget = 500;
        s.run(SimTime::from_secs(1), |s, t, d| {
            if t < last {
                return Err("clock went backwards");
            }
            last = t;
            if budget > 0 {
                budget -= 1;
                s.schedule(SimTime::from_micros(d), d / 2);
            }
            Ok(())
        })
        .unwrap();
        prop_assert_eq!(s.now(), SimTime::from_secs(1));
    }
}
