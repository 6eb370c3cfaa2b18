use horus_core::wire::{
    decode_command, decode_datagram, encode_command, ChannelModel, Delay, SimChannel, SteeringCommand, WireError,
};
use proptest::prelude::*;

#[test]
fn zero_report_text() {
    assert_eq!(encode_command(&SteeringCommand::ZERO), "0;0;0;0;0;0");
    assert!(decode_command("0;0;0;0;0;0").unwrap().is_zero_report());
}

#[test]
fn malformed_datagrams_are_rejected() {
    assert_eq!(decode_command("1;2;3"), Err(WireError::FieldCount(3)));
    assert!(matches!(
        decode_command("1;2;x;4;5;6"),
        Err(WireError::BadField { index: 2, .. })
    ));
    assert!(matches!(
        decode_command("1;2;NaN;4;5;6"),
        Err(WireError::BadField { .. })
    ));
    assert_eq!(decode_datagram(&[0xff, 0xfe]), Err(WireError::NotUtf8));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![(-300i32..300).prop_map(f64::from), -1e6..1e6f64, prop::num::f64::NORMAL,]
}

proptest! {
    #[test]
    fn codec_roundtrips(fields in prop::array::uniform6(finite())) {
        let cmd = SteeringCommand::from_fields(fields);
        let text = encode_command(&cmd);
        prop_assert_eq!(text.split(';').count(), 6);
        prop_assert_eq!(decode_command(&text).unwrap(), cmd);
    }

    #[test]
    fn channel_never_reorders(seed in any::<u64>(), loss in 0.0..0.6f64, max in 0.0..0.1f64) {
        let mut ch = SimChannel::new(ChannelModel { loss_probability: loss, delay: Delay::Uniform { min: 0.0, max }, seed });
        let mut seen = Vec::new();
        for k in 0..500u32 {
            let now = f64::from(k) * 0.005;
            ch.send(0, k.to_string(), now);
            seen.extend(ch.poll(now).into_iter().map(|(_, d)| d.parse::<u32>().unwrap()));
        }
        seen.extend(ch.poll(f64::MAX).into_iter().map(|(_, d)| d.parse::<u32>().unwrap()));
        prop_assert!(seen.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(seen.len() as u64, ch.sent() - ch.dropped());
    }
}

#[test]
fn delivery_rate_tracks_loss() {
    for loss in [0.0, 0.1, 0.35, 1.0] {
        let mut ch = SimChannel::new(ChannelModel {
            loss_probability: loss,
            delay: Delay::default(),
            seed: 3,
        });
        let n = 100_000;
        let mut got = 0;
        for k in 0..n {
            ch.send(1, "1;1;1;0;0;0".into(), k as f64 * 0.005);
            got += ch.poll(k as f64 * 0.005).len();
        }
        let rate = got as f64 / n as f64;
        assert!((rate - (1.0 - loss)).abs() <= 0.01, "loss {loss}: rate {rate}");
    }
}
