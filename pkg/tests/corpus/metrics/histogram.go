package metrics

var defaultBuckets []float64 = makeBuckets()

const epsilon = 0.001

func makeBuckets() []float64 {
	out := []float64{}
	out = append(out, 0.5)
	out = append(out, 1.0)
	out = append(out, 2.5)
	return out
}

func bucketIndex(value float64, buckets []float64) int {
	for i, b := range buckets {
		if value <= b+epsilon {
			return i
		}
	}
	return len(buckets)
}

func countBuckets(values []float64) []int {
	counts := []int{}
	n := len(defaultBuckets) + 1
	for i := 0; i < n; i++ {
		counts = append(counts, 0)
	}
	for _, v := range values {
		idx := bucketIndex(v, defaultBuckets)
		counts[idx] = counts[idx] + 1
	}
	return counts
}
