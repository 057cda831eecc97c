Move_to('left', Find('bottle'))
Grasp('left')
Move_to('right', Find('bottle_cap'))
for _ in range(3):
    Grasp('right')
    Twist('right', 'counterclockwise', 180)
    Release('right')
    Twist('right', 'clockwise', 180)
